#include <gtest/gtest.h>

#include <cmath>

#include "qkdids/metrics.hpp"

using namespace qkdids;

namespace {

double brute_auc(const std::vector<double>& h, const std::vector<double>& a) {
  double s = 0;
  for (double x : a)
    for (double y : h) s += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return s / (static_cast<double>(h.size()) * a.size());
}

}  // namespace

TEST(Auc, SmallExamples) {
  EXPECT_EQ(auc({1, 3}, {2, 4}), 0.75);
  EXPECT_EQ(auc({1, 2}, {3, 4}), 1.0);
  EXPECT_EQ(auc({3, 4}, {1, 2}), 0.0);
  EXPECT_EQ(auc({1, 1}, {1, 1}), 0.5);
  EXPECT_THROW(auc({}, {1.0}), std::invalid_argument);
}

TEST(Auc, MatchesPairCounting) {
  CounterRng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nh = 1 + rng.below(50), na = 1 + rng.below(50);
    std::vector<double> h, a;
    // coarse grid so ties are common
    for (std::size_t i = 0; i < nh; ++i) h.push_back(static_cast<double>(rng.below(12)));
    for (std::size_t i = 0; i < na; ++i) a.push_back(static_cast<double>(rng.below(12)) + 1.0);
    EXPECT_EQ(auc(h, a), brute_auc(h, a));
  }
}

TEST(Roc, Corners) {
  const auto r = roc_curve({1, 2, 3}, {2, 4});
  EXPECT_EQ(r.front().fpr, 0.0);
  EXPECT_EQ(r.front().tpr, 0.0);
  EXPECT_EQ(r.back().fpr, 1.0);
  EXPECT_EQ(r.back().tpr, 1.0);
  for (std::size_t i = 1; i < r.size(); ++i) {
    EXPECT_GE(r[i].fpr, r[i - 1].fpr);
    EXPECT_GE(r[i].tpr, r[i - 1].tpr);
  }
}

TEST(MissAtFar, Separated) {
  std::vector<double> h, a;
  for (int i = 0; i < 1000; ++i) h.push_back(i), a.push_back(2000 + i);
  EXPECT_EQ(miss_at_far(h, a, 0.01), 0.0);
  std::vector<double> low(100, -5.0);
  EXPECT_EQ(miss_at_far(h, low, 0.01), 1.0);
}

TEST(Retention, PerBlock) {
  std::vector<StreamBlock> s(4);
  for (auto& b : s) b.N = 100;
  s[2].attacked = true;
  s[2].leak = 0.004;
  s[3].attacked = true;
  s[3].leak = 0.02;  // more than r0: contributes nothing
  s[3].alarm = true;
  const Retention r = retained_fraction(s, 0.01);
  EXPECT_NEAR(r.without_detector, (1 + 1 + 0.6 + 0) / 4.0, 1e-12);
  EXPECT_NEAR(r.with_detector, (1 + 1 + 0.6) / 4.0, 1e-12);
  EXPECT_EQ(r.discard_rate, 0.0);
}

TEST(Latency, DelaysAndCensoring) {
  const std::vector<std::vector<bool>> alarms{{false, false, true, false}, {false, false, false, false},
                                              {true, false, false, true}};
  const auto r = detection_latency(alarms, {1, 0, 2});
  EXPECT_EQ(r.detected, 2);
  EXPECT_EQ(r.censored, 1);
  EXPECT_DOUBLE_EQ(r.mean_delay, (1.0 + 1.0) / 2.0);
  EXPECT_THROW(detection_latency(alarms, {0}), std::invalid_argument);
}

TEST(Latency, CusumRestarts) {
  CusumState st;
  st.mu0 = 0;
  st.sigma0 = 1;
  st.mu1 = 1;
  st.sigma1 = 1;
  st.h_cusum = 1.0;
  // llr(x) = x - 0.5 for unit variances
  const auto a = cusum_alarms(st, {1.0, 1.0, 1.0, 1.0, -3.0});
  EXPECT_EQ(a, (std::vector<bool>{false, true, false, true, false}));
}

TEST(Importance, IrrelevantFeatureIsZero) {
  DefenderModel m;
  m.oc.precision = Mat16::Zero();
  m.oc.precision(0, 0) = 1.0;  // only feature 0 matters
  std::vector<EvalWindow> set;
  CounterRng rng(3);
  for (int i = 0; i < 200; ++i) {
    FeatureVector x{};
    for (auto& v : x) v = rng.normal();
    if (i % 2) x[0] += 4.0;
    set.push_back({{x}, i % 2});
  }
  const auto imp = permutation_importance(m, set, 9);
  EXPECT_GT(imp[0], 0.2);
  for (int j = 1; j < kFeatures; ++j) EXPECT_EQ(imp[j], 0.0);
}
