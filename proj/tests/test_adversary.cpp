#include <gtest/gtest.h>

#include <cmath>

#include "qkdids/adversary.hpp"

using namespace qkdids;

namespace {

struct World {
  ChannelParams c;
  DecoyConfig d;
  FeasibleSet fs = FeasibleSet::from(c, 2.5e-11, 1000.0, 5e4);
};

std::vector<Evaluated> evaluate(const std::vector<AttackParams>& cand, const std::function<double(const AttackParams&)>& f) {
  std::vector<Evaluated> ev;
  for (const auto& a : cand) ev.push_back({a, f(a)});
  return ev;
}

}  // namespace

TEST(Search, Init) {
  World w;
  const SearchState s = search_init(Family::TimeShift, w.fs, 16, 5);
  ASSERT_EQ(s.dim(), 1u);
  EXPECT_EQ(s.mean[0], 0.0);
  EXPECT_DOUBLE_EQ(s.physical_step(0), 45.0);
  const SearchState t = search_init(Family::TimeShift, w.fs, 16, 5);
  EXPECT_EQ(s.mean, t.mean);
  EXPECT_EQ(s.covariance, t.covariance);
  EXPECT_EQ(propose(s, w.fs, w.c, w.d), propose(t, w.fs, w.c, w.d));
  EXPECT_THROW(search_init(Family::TimeShift, w.fs, 3, 5), std::invalid_argument);
  const SearchState b = search_init(Family::Blinding, w.fs, 16, 5);
  EXPECT_EQ(b.dim(), 3u);
  EXPECT_DOUBLE_EQ(b.mean[1], 500.0);
}

TEST(Search, ProposalsFeasible) {
  World w;
  int checked = 0;
  for (Family f : kAttackFamilies) {
    SearchState s = search_init(f, w.fs, 16, 7);
    s.step_size = 1.5;  // push many samples outside the box
    for (int g = 0; g < 157; ++g, ++s.generation)
      for (const auto& a : propose(s, w.fs, w.c, w.d)) {
        ASSERT_TRUE(is_feasible(a, w.fs, w.c, w.d));
        ++checked;
      }
  }
  EXPECT_GE(checked, 10000);
}

TEST(Search, TinyStepCollapsesToMean) {
  World w;
  SearchState s = search_init(Family::Trojan, w.fs, 8, 1);
  s.mean << 0.1, 0.4;
  s.step_size = 0.0;
  const AttackParams m = project(Trojan{0.1, 0.4}, w.fs, w.c, w.d);
  for (const auto& a : propose(s, w.fs, w.c, w.d)) EXPECT_EQ(a, m);
}

TEST(Search, QuadraticBowl) {
  World w;
  struct Case {
    Family f;
    std::vector<double> target;
  };
  const Case cases[] = {{Family::TimeShift, {62.0}}, {Family::Trojan, {0.12, 0.55}},
                        {Family::Blinding, {0.7, 250.0, 640.0}}};
  for (const auto& cs : cases) {
    SearchState s = search_init(cs.f, w.fs, 16, 11);
    const auto box = family_box(cs.f, w.fs);
    auto loss = [&](const AttackParams& a) {
      const auto v = attack_vector(a);
      double q = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double h = 0.5 * (box[i].second - box[i].first);
        q += (v[i] - cs.target[i]) * (v[i] - cs.target[i]) / (h * h);
      }
      return -q;
    };
    double best = -1e300;
    for (int g = 0; g < 30; ++g) {
      s = update(s, evaluate(propose(s, w.fs, w.c, w.d), loss), w.fs, w.c, w.d);
      EXPECT_GE(s.best_loss, best);
      best = s.best_loss;
    }
    for (std::size_t i = 0; i < cs.target.size(); ++i) {
      const double h = 0.5 * (box[i].second - box[i].first);
      EXPECT_LE(std::abs(s.mean[static_cast<Eigen::Index>(i)] - cs.target[i]), 0.05 * h)
          << family_name(cs.f) << " axis " << i;
    }
  }
}

TEST(Search, EqualLossesKeepBest) {
  World w;
  SearchState s = search_init(Family::TimeShift, w.fs, 16, 2);
  s = update(s, evaluate(propose(s, w.fs, w.c, w.d), [](const AttackParams&) { return 1.0; }), w.fs, w.c, w.d);
  const AttackParams first = s.best;
  EXPECT_EQ(s.best_loss, 1.0);
  EXPECT_LE(std::abs(s.mean[0]), 2 * 45.0);
  s = update(s, evaluate(propose(s, w.fs, w.c, w.d), [](const AttackParams&) { return 1.0; }), w.fs, w.c, w.d);
  EXPECT_EQ(s.best, first);
}

TEST(Search, UpdateRejectsForeignCandidates) {
  World w;
  const SearchState s = search_init(Family::TimeShift, w.fs, 4, 2);
  auto ev = evaluate(propose(s, w.fs, w.c, w.d), [](const AttackParams&) { return 0.0; });
  ev[2].candidate = TimeShift{149.0};
  EXPECT_THROW(update(s, ev, w.fs, w.c, w.d), std::invalid_argument);
  ev.pop_back();
  EXPECT_THROW(update(s, ev, w.fs, w.c, w.d), std::invalid_argument);
}

TEST(Search, DegenerateBox) {
  World w;
  w.fs.dt_max = 0.0;
  SearchState s = search_init(Family::TimeShift, w.fs, 8, 3);
  s = run_search(s, 5, w.fs, w.c, w.d, [&](const std::vector<AttackParams>& cand, int) {
    std::vector<double> l;
    for (const auto& a : cand) l.push_back(std::abs(std::get<TimeShift>(a).dt));
    return l;
  });
  EXPECT_EQ(std::get<TimeShift>(s.best).dt, 0.0);
}

TEST(Budget, Penalty) {
  World w;
  EXPECT_EQ(budgeted_loss(3.0, TimeShift{40}, 0.0, w.fs), 3.0);
  EXPECT_EQ(budgeted_loss(3.0, NullAttack{}, 2.0, w.fs), 3.0);
  EXPECT_EQ(budgeted_loss(3.0, TimeShift{w.fs.dt_max}, 0.7, w.fs), 3.0 - 0.7);
  EXPECT_THROW(budgeted_loss(3.0, NullAttack{}, -1.0, w.fs), std::invalid_argument);
}

TEST(Dro, Reweight) {
  FamilyMixture m;
  m.budget = 0.1;
  const FamilyMixture same = dro_reweight(m, {0.3, 0.3, 0.3, 0.3}, 5.0);
  EXPECT_EQ(same.weights, m.weights);
  EXPECT_EQ(dro_reweight(m, {0.1, 9.0, 0.3, 0.2}, 0.0).weights, m.weights);

  const FamilyMixture hot = dro_reweight(m, {0.0, 10.0, 0.0, 0.0}, 1.0);
  EXPECT_NEAR(hot.tv_from_uniform(), 0.1, 1e-15);
  double sum = 0;
  for (double w : hot.weights) {
    EXPECT_GE(w, 0.0);
    sum += w;
  }
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_GT(hot.weights[1], 0.25);

  FamilyMixture loose = m;
  loose.budget = 0.75;
  const FamilyMixture mild = dro_reweight(loose, {0.0, 0.2, 0.0, 0.0}, 1.0);
  EXPECT_LT(mild.tv_from_uniform(), 0.75);
  EXPECT_THROW(dro_reweight(m, {0.0, NAN, 0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST(Dro, Draw) {
  FamilyMixture m;
  m.weights = {0.0, 0.5, 0.5, 0.0};
  EXPECT_EQ(m.draw(0.1), Family::Blinding);
  EXPECT_EQ(m.draw(0.6), Family::PNS);
  EXPECT_EQ(m.draw(0.9999999), Family::PNS);
}
