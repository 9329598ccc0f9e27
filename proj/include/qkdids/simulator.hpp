#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qkdids/attack.hpp"
#include "qkdids/counts.hpp"
#include "qkdids/parallel.hpp"
#include "qkdids/physics.hpp"
#include "qkdids/rng.hpp"

namespace qkdids {

inline constexpr int kTimingBins = 64;
inline constexpr double kTimingLo = -300.0;
inline constexpr double kTimingHi = 300.0;
inline constexpr double kTimingWidth = (kTimingHi - kTimingLo) / kTimingBins;

inline double timing_bin_center(int i) { return kTimingLo + (i + 0.5) * kTimingWidth; }

struct BlockTruth {
  AttackParams attack = NullAttack{};
  double leak = 0.0;  // bits per emitted pulse
  ChannelParams channel;
  DecoyConfig decoy;
  bool attacked() const { return family_of(attack) != Family::Null; }
};

struct BlockRecord {
  std::uint64_t N = 0;
  CellTable counts;
  std::uint64_t det0 = 0;
  std::uint64_t det1 = 0;
  std::uint64_t double_clicks = 0;
  std::array<std::uint64_t, kTimingBins> timing_hist{};
  double proxy_bias = 0.0;
  double proxy_temp = 0.0;
  double proxy_Pret = 0.0;
  BlockTruth truth;

  std::uint64_t total_detections() const { return det0 + det1; }
};

namespace detail {

struct PulseTally {
  CellTable counts;
  std::uint64_t det0 = 0, det1 = 0, double_clicks = 0;
  std::array<std::uint64_t, kTimingBins> hist{};

  PulseTally& operator+=(const PulseTally& o) {
    counts += o.counts;
    det0 += o.det0;
    det1 += o.det1;
    double_clicks += o.double_clicks;
    for (int i = 0; i < kTimingBins; ++i) hist[i] += o.hist[i];
    return *this;
  }
};

// Inverse-CDF Poisson; intensities here are below 1 so the loop is short.
inline int sample_poisson(double mu, double p0, double u) {
  double p = p0, cdf = p0;
  int n = 0;
  while (u >= cdf && n < 64) {
    ++n;
    p *= mu / n;
    cdf += p;
  }
  return n;
}

inline int timing_bin(double t) {
  const int i = static_cast<int>(std::floor((t - kTimingLo) / kTimingWidth));
  return std::clamp(i, 0, kTimingBins - 1);
}

// 1 - (1 - e)^n for small n.
inline double any_of(double e, int n) {
  double miss = 1.0;
  for (int k = 0; k < n; ++k) miss *= 1.0 - e;
  return 1.0 - miss;
}

inline constexpr double kU32 = 0x1.0p-32;
inline double hi32(std::uint64_t r) { return static_cast<double>(r >> 32) * kU32; }
inline double lo32(std::uint64_t r) { return static_cast<double>(r & 0xffffffffULL) * kU32; }

struct PulseModel {
  double cum_s, cum_sw;  // intensity selection thresholds
  double mu[3];
  double p0[3];          // e^{-mu}
  double p_Z;
  double e_d;
  double dark;           // per-detector dark probability
  double eta;            // nominal, used by controlled gates
  EffectiveChannel eff;
  double sigma_t;
};

inline void simulate_pulse(const PulseModel& m, std::uint64_t seed, std::uint64_t pulse, PulseTally& t) {
  CounterRng rng(derive_key(seed, pulse));
  // Setting draws use 32-bit halves; resolution 2^-32 is far below every
  // probability they are compared against.
  const std::uint64_t r0 = rng.next_u64(), r1 = rng.next_u64();
  const double u_mu = hi32(r0);
  const int mi = u_mu < m.cum_s ? kSignal : (u_mu < m.cum_sw ? kWeak : kVacuum);
  const int a_basis = lo32(r0) < m.p_Z ? kZ : kX;
  const int b_basis = hi32(r1) < m.p_Z ? kZ : kX;
  const int bit = static_cast<int>(r1 & 1u);
  const bool matched = a_basis == b_basis;
  const int n = mi == kVacuum && m.mu[mi] == 0.0 ? 0 : sample_poisson(m.mu[mi], m.p0[mi], rng.uniform());

  CellCounts& cell = t.counts.at(mi, a_basis);
  ++cell.emitted;
  if (matched) ++cell.sifted;

  bool click0 = false, click1 = false;
  if (m.eff.ctl_fraction > 0.0 && rng.uniform() < m.eff.ctl_fraction) {
    // Blinded gate: one forced click, no dark counts, no double clicks.
    if (n > 0 && rng.uniform() < any_of(m.eta, n)) {
      const int out = matched ? bit : (rng.bit() ? 1 : 0);
      (out == 0 ? click0 : click1) = true;
    }
  } else {
    int photons = n;
    double e0 = m.eff.eta0, e1 = m.eff.eta1;
    if (n == 1 && m.eff.y1_block > 0.0 && rng.uniform() < m.eff.y1_block) photons = 0;
    if (n >= 2 && m.eff.y_mult_boost > 0.0 && rng.uniform() < m.eff.y_mult_boost) e0 = e1 = 1.0;
    if (photons > 0) {
      if (matched) {
        const std::uint64_t r = rng.next_u64();
        const int target = bit ^ (hi32(r) < m.e_d ? 1 : 0);
        const double e = target == 0 ? e0 : e1;
        if (rng.uniform() < any_of(e, photons)) (target == 0 ? click0 : click1) = true;
      } else {
        const double h0 = 0.5 * e0, h01 = 0.5 * (e0 + e1);
        for (int k = 0; k < photons; ++k) {
          const double u = rng.uniform();
          if (u < h0) click0 = true;
          else if (u < h01) click1 = true;
        }
      }
    }
    const std::uint64_t rd = rng.next_u64();
    if (hi32(rd) < m.dark) click0 = true;
    if (lo32(rd) < m.dark) click1 = true;
  }
  if (!click0 && !click1) return;

  int out;
  if (click0 && click1) {
    ++t.double_clicks;
    out = rng.bit() ? 1 : 0;
  } else {
    out = click0 ? 0 : 1;
  }
  (out == 0 ? t.det0 : t.det1) += 1;
  t.hist[timing_bin(m.eff.dt_applied + m.sigma_t * rng.normal())] += 1;
  if (matched) {
    ++cell.detected;
    if (out != bit) ++cell.errors;
  }
}

}  // namespace detail

inline constexpr std::uint64_t kPulseChunk = 1u << 16;
inline constexpr std::uint64_t kMaxBlockPulses = 1ull << 34;

/// Monte Carlo block. Every pulse draws from its own counter stream keyed by
/// (seed, pulse index), so the result does not depend on `threads`.
inline BlockRecord simulate_block(const ChannelParams& c, const DecoyConfig& d, const AttackParams& attack,
                                  std::uint64_t N, std::uint64_t seed, const FeasibleSet& fs,
                                  unsigned threads = 1) {
  if (N == 0 || N > kMaxBlockPulses) throw std::invalid_argument("simulate_block: invalid N");
  c.validate();
  d.validate();
  const EffectiveChannel eff = apply_attack(attack, c, d, fs);

  detail::PulseModel m{};
  m.cum_s = d.p_s;
  m.cum_sw = d.p_s + d.p_w;
  for (int i = 0; i < 3; ++i) {
    m.mu[i] = d.mu(i);
    m.p0[i] = std::exp(-d.mu(i));
  }
  m.p_Z = d.p_Z;
  m.e_d = c.e_d;
  m.dark = 0.5 * c.p_d;
  m.eta = c.eta();
  m.eff = eff;
  m.sigma_t = c.sigma_t;

  const std::uint64_t chunks = (N + kPulseChunk - 1) / kPulseChunk;
  std::vector<detail::PulseTally> part(chunks);
  parallel_for(
      chunks,
      [&](std::size_t k) {
        const std::uint64_t lo = k * kPulseChunk, hi = std::min(N, lo + kPulseChunk);
        for (std::uint64_t p = lo; p < hi; ++p) detail::simulate_pulse(m, seed, p, part[k]);
      },
      threads);
  detail::PulseTally total;
  for (const auto& p : part) total += p;

  BlockRecord rec;
  rec.N = N;
  rec.counts = total.counts;
  rec.det0 = total.det0;
  rec.det1 = total.det1;
  rec.double_clicks = total.double_clicks;
  rec.timing_hist = total.hist;

  CounterRng mon(derive_key(seed, 0x6d6f6e69746f72ULL));
  rec.proxy_bias = eff.proxy_bias + c.sigma_bias * mon.normal();
  rec.proxy_temp = c.sigma_temp * mon.normal();
  rec.proxy_Pret = eff.proxy_Pret + c.sigma_pret * mon.normal();

  rec.truth.attack = attack;
  rec.truth.leak = eve_leakage(attack, c, d, fs);
  rec.truth.channel = c;
  rec.truth.decoy = d;
  return rec;
}

struct StreamOptions {
  bool randomize = true;
  unsigned threads = thread_count();
};

/// Block t uses seed base_seed ^ t. With randomization on, each block draws
/// its own channel and the attack is re-projected against it.
inline std::vector<BlockRecord> simulate_stream(const ChannelParams& c, const DecoyConfig& d,
                                                const std::vector<AttackParams>& schedule, std::uint64_t N,
                                                std::uint64_t base_seed, const FeasibleSet& fs,
                                                const StreamOptions& opt = {}) {
  if (schedule.empty()) throw std::invalid_argument("simulate_stream: empty schedule");
  std::vector<BlockRecord> out(schedule.size());
  parallel_for(
      schedule.size(),
      [&](std::size_t t) {
        const std::uint64_t seed = base_seed ^ static_cast<std::uint64_t>(t);
        if (opt.randomize) {
          const RandomizedDomain dom = randomize_domain(c, d, seed);
          const AttackParams a = project(schedule[t], fs, dom.channel, dom.decoy);
          out[t] = simulate_block(dom.channel, dom.decoy, a, N, seed, fs, 1);
        } else {
          out[t] = simulate_block(c, d, project(schedule[t], fs, c, d), N, seed, fs, 1);
        }
      },
      opt.threads);
  return out;
}

}  // namespace qkdids
