#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "qkdids/simulator.hpp"

using namespace qkdids;

namespace {

struct World {
  ChannelParams c;
  DecoyConfig d;
  FeasibleSet fs(std::uint64_t N) const { return FeasibleSet::from(c, 2.5e-11, 1000.0, static_cast<double>(N)); }
};

double binom_se(double p, double n) { return std::sqrt(p * (1 - p) / n); }

double hist_mean(const BlockRecord& b) {
  double s = 0;
  for (int i = 0; i < kTimingBins; ++i) s += timing_bin_center(i) * b.timing_hist[i];
  return s / static_cast<double>(b.total_detections());
}

}  // namespace

TEST(Simulator, HonestGainsMatchClosedForm) {
  World w;
  const std::uint64_t N = 2000000;
  const BlockRecord b = simulate_block(w.c, w.d, NullAttack{}, N, 1234, w.fs(N));
  const double eta = w.c.eta();
  for (int i = 0; i < kIntensities; ++i) {
    for (int bs = 0; bs < kBases; ++bs) {
      const CellCounts& cell = b.counts.at(i, bs);
      const double q = gain(w.d.mu(i), eta, w.c.p_d);
      const double n = static_cast<double>(cell.sifted);
      EXPECT_NEAR(cell.detected / n, q, 3.0 * binom_se(q, n) + 1e-12) << "cell " << i << "," << bs;
      const double eq = error_gain(w.d.mu(i), eta, w.c.p_d, w.c.e_d);
      EXPECT_NEAR(cell.errors / n, eq, 3.0 * binom_se(eq, n) + 1e-12) << "cell " << i << "," << bs;
    }
  }
  const auto& s = b.counts.at(kSignal, kZ);
  const double p_sift = w.d.p_s * w.d.p_Z * w.d.p_Z;
  EXPECT_NEAR(static_cast<double>(s.sifted), N * p_sift, 3.0 * std::sqrt(N * p_sift * (1 - p_sift)));
}

TEST(Simulator, Invariants) {
  World w;
  const std::uint64_t N = 200000;
  for (const AttackParams& a : {AttackParams(NullAttack{}), AttackParams(TimeShift{80}),
                                AttackParams(Blinding{0.8, 100, 700}), AttackParams(PNS{0.05}),
                                AttackParams(Trojan{0.2, 0.3})}) {
    const BlockRecord b = simulate_block(w.c, w.d, a, N, 5, w.fs(N));
    EXPECT_EQ(b.counts.emitted(), N);
    for (const auto& row : b.counts.cell)
      for (const auto& c : row) {
        EXPECT_LE(c.sifted, c.emitted);
        EXPECT_LE(c.detected, c.sifted);
        EXPECT_LE(c.errors, c.detected);
      }
    EXPECT_EQ(std::accumulate(b.timing_hist.begin(), b.timing_hist.end(), std::uint64_t{0}), b.total_detections());
    EXPECT_LE(b.double_clicks, b.total_detections());
    EXPECT_EQ(b.truth.attack, a);
  }
}

TEST(Simulator, DeterministicAcrossThreads) {
  World w;
  const std::uint64_t N = 300000;
  const BlockRecord a = simulate_block(w.c, w.d, TimeShift{40}, N, 77, w.fs(N), 1);
  const BlockRecord b = simulate_block(w.c, w.d, TimeShift{40}, N, 77, w.fs(N), 1);
  const BlockRecord c = simulate_block(w.c, w.d, TimeShift{40}, N, 77, w.fs(N), 4);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.counts, c.counts);
  EXPECT_EQ(a.timing_hist, c.timing_hist);
  EXPECT_EQ(a.double_clicks, c.double_clicks);
  EXPECT_EQ(a.proxy_bias, c.proxy_bias);
  const BlockRecord other = simulate_block(w.c, w.d, TimeShift{40}, N, 78, w.fs(N), 1);
  EXPECT_NE(a.counts, other.counts);
}

TEST(Simulator, DoubleClicks) {
  World w;
  const std::uint64_t N = 2000000;
  const BlockRecord honest = simulate_block(w.c, w.d, NullAttack{}, N, 3, w.fs(N));
  EXPECT_GT(honest.double_clicks, 0u);
  const BlockRecord blind = simulate_block(w.c, w.d, Blinding{1.0, 0.0, 1000.0}, 200000, 3, w.fs(200000));
  EXPECT_EQ(blind.double_clicks, 0u);
  EXPECT_GT(blind.total_detections(), 0u);
}

TEST(Simulator, VacuumGainIsDarkRate) {
  World w;
  w.c.p_d = 1e-4;  // raise the rate so the check has statistical power
  const std::uint64_t N = 2000000;
  const BlockRecord b = simulate_block(w.c, w.d, NullAttack{}, N, 8, w.fs(N));
  CellCounts v = b.counts.at(kVacuum, kZ);
  v += b.counts.at(kVacuum, kX);
  const double n = static_cast<double>(v.sifted);
  EXPECT_NEAR(v.detected / n, w.c.p_d, 3 * binom_se(w.c.p_d, n));
}

TEST(Simulator, Rejections) {
  World w;
  EXPECT_THROW(simulate_block(w.c, w.d, NullAttack{}, 0, 1, w.fs(1)), std::invalid_argument);
  EXPECT_THROW(simulate_block(w.c, w.d, TimeShift{400}, 1000, 1, w.fs(1000)), std::invalid_argument);
}

TEST(Stream, TimeShiftMovesHistogram) {
  World w;
  const std::uint64_t N = 200000;
  StreamOptions opt;
  opt.randomize = false;
  const auto blocks = simulate_stream(w.c, w.d, {NullAttack{}, TimeShift{120}}, N, 0xabc, w.fs(N), opt);
  ASSERT_EQ(blocks.size(), 2u);
  const double shift = hist_mean(blocks[1]) - hist_mean(blocks[0]);
  const double se = w.c.sigma_t * std::sqrt(1.0 / blocks[0].total_detections() + 1.0 / blocks[1].total_detections());
  EXPECT_NEAR(shift, 120.0, 3 * se + 1.0);  // 1 ps allowance for edge-bin clamping
}

TEST(Stream, SeedsAndOrder) {
  World w;
  const std::uint64_t N = 50000;
  const std::vector<AttackParams> sched(5, NullAttack{});
  const auto s1 = simulate_stream(w.c, w.d, sched, N, 100, w.fs(N), {true, 1});
  const auto s2 = simulate_stream(w.c, w.d, sched, N, 100, w.fs(N), {true, 3});
  ASSERT_EQ(s1.size(), 5u);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(s1[t].counts, s2[t].counts);
    const auto solo = simulate_block(s1[t].truth.channel, s1[t].truth.decoy, NullAttack{}, N, 100 ^ t, w.fs(N));
    EXPECT_EQ(solo.counts, s1[t].counts);
  }
  EXPECT_NE(s1[0].counts, s1[1].counts);
  EXPECT_NE(s1[0].truth.channel, s1[1].truth.channel);
  EXPECT_THROW(simulate_stream(w.c, w.d, {}, N, 1, w.fs(N)), std::invalid_argument);
}
