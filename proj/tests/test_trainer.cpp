#include <gtest/gtest.h>

#include <cstdlib>

#include "qkdids/trainer.hpp"

using namespace qkdids;

namespace {

struct World {
  ChannelParams c;
  DecoyConfig d;
  EpsilonBudget eps;
  FeasibleSet fs = FeasibleSet::from(c, eps.eps_decoy, 1000.0, 2e4);
};

TrainConfig small() {
  TrainConfig t;
  t.rounds = 2;
  t.generations = 3;
  t.population = 6;
  t.blocks_per_candidate = 2;
  t.block_pulses = 20000;
  t.honest_blocks = 300;
  t.seeded_attack_blocks = 48;
  t.hard_negatives_per_round = 32;
  t.epochs = 2;
  t.hidden = 8;
  return t;
}

}  // namespace

TEST(Windows, StreamNeverCrossesLowerBound) {
  std::vector<FeatureVector> raw(10);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i][0] = static_cast<double>(i);
  const auto w = stream_windows(raw, 4, 8, 3);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0].raw.size(), 1u);
  EXPECT_EQ(w[1].raw.size(), 2u);
  EXPECT_EQ(w[2].raw.size(), 3u);
  EXPECT_EQ(w[3].raw.front()[0], 5.0);
  EXPECT_EQ(w[3].raw.back()[0], 7.0);
}

TEST(Windows, EpisodeContext) {
  const World wd;
  std::vector<FeatureVector> ctx(3);
  const auto ep = simulate_stream(wd.c, wd.d, {TimeShift{50}, TimeShift{50}}, 20000, 4, wd.fs);
  const auto w = episode_windows(ctx, ep, 0.01, 4);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].raw.size(), 4u);
  EXPECT_EQ(w[1].raw.size(), 4u);
  EXPECT_EQ(w[0].label, 1);
  EXPECT_EQ(w[1].family, Family::TimeShift);
  EXPECT_EQ(w[0].gap, std::min(0.01, ep[0].truth.leak));
}

TEST(Trainer, HonestOnlySingleRound) {
  const World wd;
  TrainConfig t = small();
  t.rounds = 1;
  t.attacks_enabled = false;
  const auto r = minimax_train(wd.c, wd.d, wd.eps, wd.fs, t);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].worst_family, Family::Null);
  EXPECT_EQ(r.model.lambda_mix, 1.0);
  EXPECT_TRUE(std::isfinite(r.model.tau));
  EXPECT_TRUE(r.search_log.empty());
  EXPECT_GT(r.history[0].r0_ref, 0.0);
}

TEST(Trainer, RejectsBadConfig) {
  const World wd;
  TrainConfig t = small();
  t.far_target = 0.2;
  EXPECT_THROW(minimax_train(wd.c, wd.d, wd.eps, wd.fs, t), std::invalid_argument);
  t = small();
  t.rounds = 0;
  EXPECT_THROW(minimax_train(wd.c, wd.d, wd.eps, wd.fs, t), std::invalid_argument);
}

TEST(Trainer, DeterministicAcrossThreadCounts) {
  const World wd;
  const TrainConfig t = small();
  setenv("QKDIDS_THREADS", "1", 1);
  const auto a = minimax_train(wd.c, wd.d, wd.eps, wd.fs, t);
  setenv("QKDIDS_THREADS", "3", 1);
  const auto b = minimax_train(wd.c, wd.d, wd.eps, wd.fs, t);
  unsetenv("QKDIDS_THREADS");
  ASSERT_EQ(a.history.size(), 2u);
  EXPECT_EQ(a.model.temporal, b.model.temporal);
  EXPECT_EQ(a.model.tau, b.model.tau);
  EXPECT_EQ(a.model.oc.precision, b.model.oc.precision);
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].worst, b.history[k].worst);
    EXPECT_EQ(a.history[k].worst_loss, b.history[k].worst_loss);
    EXPECT_EQ(a.history[k].miss_rate, b.history[k].miss_rate);
  }
  // every round searched every family
  EXPECT_EQ(a.search_log.size(), 2u * 4u * 3u);
  EXPECT_NE(a.history[1].worst_family, Family::Null);
}
