#include <gtest/gtest.h>

#include <cmath>

#include "qkdids/finite_key.hpp"
#include "qkdids/simulator.hpp"

using namespace qkdids;

namespace {

double log_binom_pmf(int k, int n, double p) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
         (n - k) * std::log1p(-p);
}

double upper_tail(int k, int n, double p) {  // P(X >= k)
  double s = 0.0;
  for (int j = k; j <= n; ++j) s += std::exp(log_binom_pmf(j, n, p));
  return s;
}

double lower_tail(int k, int n, double p) {  // P(X <= k)
  double s = 0.0;
  for (int j = 0; j <= k; ++j) s += std::exp(log_binom_pmf(j, n, p));
  return s;
}

DecoyRates exact_rates(double eta, double p_d, double e_d, const DecoyConfig& d) {
  auto point = [](double v) { return Interval{v, v}; };
  return {point(gain(d.mu_s, eta, p_d)), point(gain(d.mu_w, eta, p_d)),
          point(error_gain(d.mu_w, eta, p_d, e_d)), point(p_d)};
}

}  // namespace

TEST(ClopperPearson, ZeroSuccesses) {
  const Interval iv = clopper_pearson(0, 100, 0.05);
  EXPECT_EQ(iv.lower, 0.0);
  EXPECT_NEAR(iv.upper, 1.0 - std::pow(0.025, 0.01), 1e-12);
  EXPECT_NEAR(iv.upper, 0.0362, 1e-4);
  EXPECT_NEAR(lower_tail(0, 100, iv.upper), 0.025, 1e-10);
}

TEST(ClopperPearson, Boundaries) {
  EXPECT_EQ(clopper_pearson(100, 100, 1e-10).upper, 1.0);
  EXPECT_THROW(clopper_pearson(3, 2, 0.05), std::invalid_argument);
  EXPECT_THROW(clopper_pearson(0, 0, 0.05), std::invalid_argument);
}

TEST(ClopperPearson, TailSummationOracle) {
  for (auto [k, n] : {std::pair{50, 100}, std::pair{7, 300}, std::pair{290, 300}}) {
    const Interval iv = clopper_pearson(k, n, 0.05);
    EXPECT_NEAR(upper_tail(k, n, iv.lower), 0.025, 1e-9);
    EXPECT_NEAR(lower_tail(k, n, iv.upper), 0.025, 1e-9);
  }
  const Interval mid = clopper_pearson(50, 100, 0.05);
  EXPECT_TRUE(mid.contains(0.5));
  EXPECT_NEAR(0.5 - mid.lower, mid.upper - 0.5, 1e-9);
}

TEST(ClopperPearson, Coverage) {
  const int n = 200;
  const double p = 0.1, eps = 0.05;
  CounterRng rng(11);
  int covered = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    int k = 0;
    for (int i = 0; i < n; ++i) k += rng.uniform() < p;
    covered += clopper_pearson(k, n, eps).contains(p);
  }
  EXPECT_GE(covered, static_cast<int>(std::ceil((1 - eps) * trials)));
}

TEST(BinaryEntropy, Values) {
  EXPECT_EQ(binary_entropy(0.5), 1.0);
  EXPECT_EQ(binary_entropy(0.0), 0.0);
  EXPECT_EQ(binary_entropy(1.0), 0.0);
  // -0.11 log2 0.11 - 0.89 log2 0.89, evaluated with natural logs
  const double ref = -(0.11 * std::log(0.11) + 0.89 * std::log(0.89)) / std::log(2.0);
  EXPECT_NEAR(binary_entropy(0.11), ref, 1e-15);
  EXPECT_NEAR(binary_entropy(0.11), 0.499916, 1e-6);
  EXPECT_THROW(binary_entropy(1.5), std::invalid_argument);
}

TEST(Leakage, ErrorCorrection) {
  EXPECT_NEAR(ec_leakage(1000, 0.0, 1.16, 1e-11), 36.5412, 1e-4);
  EXPECT_NEAR(ec_leakage(1000, 0.5, 1.0, 1e-11), 1036.5412, 1e-4);
  const double n = 2e5 * 0.68 * 0.875;
  const double h = -(0.012 * std::log2(0.012) + 0.988 * std::log2(0.988));
  EXPECT_NEAR(ec_leakage(n, 0.012, 1.16, 2.5e-11), 1.16 * n * h + std::log2(4e10), 1e-9);
}

TEST(Leakage, EatPenalty) {
  EXPECT_NEAR(eat_penalty(2.0 / std::exp(2.0), 1, 4.0), 4.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(eat_penalty(2.5e-11, 2e5, 4.0), 8963.0874094357, 1e-6);
  EXPECT_NEAR(eat_penalty(2.5e-11, 4e5, 4.0) / eat_penalty(2.5e-11, 2e5, 4.0), std::sqrt(2.0), 1e-12);
  EXPECT_THROW(eat_penalty(1e-10, 0, 4.0), std::invalid_argument);
}

TEST(DecoyBounds, AsymptoticGolden) {
  const DecoyConfig d;
  const double eta = transmittance(50, 0.2);
  const DecoyBounds b = decoy_bounds_from_rates(exact_rates(eta, 1e-6, 0.01, d), d);
  EXPECT_NEAR(b.Y1_L, 0.0972544, 1e-6);
  EXPECT_NEAR(b.e1_U, 0.0113125, 1e-6);
  EXPECT_LE(b.Y1_L, yield_n(1, eta, 1e-6));
  EXPECT_GE(b.e1_U, error_n(1, eta, 1e-6, 0.01));
  EXPECT_FALSE(b.vacuous);
}

TEST(DecoyBounds, AsymptoticSeriesCrossCheck) {
  // Same bound fed by truncated Poisson sums instead of the closed-form gains.
  const DecoyConfig d;
  const double eta = 0.1, pd = 1e-6, ed = 0.01;
  auto q = [&](double mu) {
    double s = 0;
    for (int n = 0; n <= 50; ++n) s += poisson_pmf(n, mu) * yield_n(n, eta, pd);
    return s;
  };
  auto eq = [&](double mu) {
    double s = 0;
    for (int n = 0; n <= 50; ++n) s += poisson_pmf(n, mu) * (ed * yield_n(n, eta, pd) + 0.5 * pd - ed * pd);
    return s;
  };
  const DecoyRates r{{q(d.mu_s), q(d.mu_s)}, {q(d.mu_w), q(d.mu_w)}, {eq(d.mu_w), eq(d.mu_w)}, {pd, pd}};
  const DecoyBounds b = decoy_bounds_from_rates(r, d);
  EXPECT_NEAR(b.Y1_L, 0.0972544, 1e-6);
  EXPECT_NEAR(b.e1_U, 0.0113125, 1e-6);
}

TEST(DecoyBounds, ZeroVacuumDetections) {
  CellTable t;
  t.at(kSignal, kZ) = {100000, 90000, 4400, 45};
  t.at(kWeak, kZ) = {30000, 27000, 270, 3};
  t.at(kVacuum, kZ) = {10000, 9000, 0, 0};
  t.at(kVacuum, kX) = {1000, 100, 0, 0};
  const DecoyBounds b = decoy_bounds(t, DecoyConfig{}, 1e-10);
  EXPECT_EQ(b.Y0_L, 0.0);
  EXPECT_GT(b.Y0_U, 0.0);
  EXPECT_GE(b.Y1_L, 0.0);
  EXPECT_LE(b.e1_U, 0.5);
}

TEST(DecoyBounds, VacuousFlag) {
  CellTable t;
  t.at(kSignal, kZ) = {1000, 900, 500, 10};
  t.at(kWeak, kZ) = {1000, 900, 5, 1};
  t.at(kVacuum, kZ) = {1000, 900, 10, 5};
  const DecoyBounds b = decoy_bounds(t, DecoyConfig{}, 1e-10);
  EXPECT_TRUE(b.vacuous);
  EXPECT_EQ(b.e1_U, 0.5);
  EXPECT_EQ(b.Y1_L, 0.0);
}

TEST(SecretFraction, VacuousPhaseBoundGivesZero) {
  CellTable t;
  t.at(kSignal, kZ) = {1000, 900, 500, 10};
  t.at(kWeak, kZ) = {1000, 900, 5, 1};
  t.at(kVacuum, kZ) = {1000, 900, 10, 5};
  EXPECT_EQ(secret_fraction(t, DecoyConfig{}, EpsilonBudget{}).r, 0.0);
}

TEST(SecretFraction, HonestLargeBlockPositive) {
  const ChannelParams c;
  const DecoyConfig d;
  const FeasibleSet fs = FeasibleSet::from(c, 2.5e-11, 1000, 2e6);
  const BlockRecord b = simulate_block(c, d, NullAttack{}, 2000000, 0x5eed, fs);
  const SecretFractionReport rep = secret_fraction(b.counts, d, EpsilonBudget{});
  EXPECT_GT(rep.r, 0.0);
  EXPECT_GT(rep.s1_ZL, 0.0);
  EXPECT_LE(rep.s1_ZL, rep.n_key);
  const double manual = (rep.s1_ZL * (1 - binary_entropy(rep.e1_U)) - rep.lambda_EC - rep.delta_EAT) / 2e6;
  EXPECT_NEAR(rep.r, manual, 1e-15);
}

TEST(SecretFraction, MonotoneInDistance) {
  const DecoyConfig d;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ChannelParams near, far;
    far.L = 100;
    const auto bn = simulate_block(near, d, NullAttack{}, 2000000, seed, FeasibleSet::from(near, 2.5e-11, 1000, 2e6));
    const auto bf = simulate_block(far, d, NullAttack{}, 2000000, seed, FeasibleSet::from(far, 2.5e-11, 1000, 2e6));
    EXPECT_LE(secret_fraction(bf.counts, d, EpsilonBudget{}).r, secret_fraction(bn.counts, d, EpsilonBudget{}).r);
  }
}

TEST(SecretFraction, AttackedReduction) {
  EXPECT_EQ(attacked_secret_fraction(0.01, 0.0), 0.01);
  EXPECT_EQ(attacked_secret_fraction(0.01, 0.02), 0.0);
  const double leak = 0.1 * 0.7 * 0.9 * gain(0.5, 0.1, 1e-6);
  EXPECT_NEAR(attacked_secret_fraction(0.01, leak), 0.01 - leak, 1e-15);
  EXPECT_THROW(attacked_secret_fraction(0.01, -1e-3), std::invalid_argument);
}

TEST(OperationalLoss, Arithmetic) {
  LossWeights w{1, 1, 1000};
  EXPECT_DOUBLE_EQ(operational_loss(true, true, 0.0, 0.0, w), 1.0);
  EXPECT_NEAR(operational_loss(false, false, 0.002, 0.001, w), 2.0, 1e-12);
  EXPECT_EQ(operational_loss(false, true, 0.002, 0.0, w), 0.0);
  EXPECT_THROW(operational_loss(false, false, 0, 0, LossWeights{-1, 1, 1}), std::invalid_argument);
  double prev = -1;
  for (double gap = 0; gap < 0.01; gap += 0.001) {
    const double l = operational_loss(false, false, 0.01, 0.01 - gap, w);
    EXPECT_GE(l, prev);
    EXPECT_GE(l, 0.0);
    prev = l;
  }
}

TEST(EpsilonBudget, Split) {
  const auto b = EpsilonBudget::split_equally(1e-10);
  EXPECT_NO_THROW(b.validate());
  EXPECT_EQ(b.eps_decoy, b.eps_PE);
  EpsilonBudget bad = b;
  bad.eps_decoy = 1e-9;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
