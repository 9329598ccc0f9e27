#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qkdids/defender.hpp"
#include "qkdids/finite_key.hpp"
#include "qkdids/simulator.hpp"

namespace qkdids {

/// Mann-Whitney: P(attacked > honest) + P(tie)/2, by sort and rank sums.
inline double auc(const std::vector<double>& honest, const std::vector<double>& attacked) {
  if (honest.empty() || attacked.empty()) throw std::invalid_argument("auc: empty score set");
  std::vector<std::pair<double, int>> all;
  all.reserve(honest.size() + attacked.size());
  for (double s : honest) all.emplace_back(s, 0);
  for (double s : attacked) all.emplace_back(s, 1);
  std::sort(all.begin(), all.end());
  // Count pairs in integers scaled by two so ties stay exact.
  std::uint64_t twice = 0, below_h = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t h = 0, a = 0;
    while (j < all.size() && all[j].first == all[i].first) (all[j].second ? a : h) += 1, ++j;
    twice += a * (2 * below_h + h);
    below_h += h;
    i = j;
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(honest.size()) * static_cast<double>(attacked.size()));
}

inline double miss_at_far(const std::vector<double>& honest, const std::vector<double>& attacked, double far) {
  if (attacked.empty()) throw std::invalid_argument("miss_at_far: empty attacked set");
  const double tau = calibrate_threshold(honest, far);
  const auto missed = std::count_if(attacked.begin(), attacked.end(), [&](double s) { return s < tau; });
  return static_cast<double>(missed) / static_cast<double>(attacked.size());
}

struct RocPoint {
  double threshold, fpr, tpr;
};

/// One point per distinct score, decreasing threshold, plus the (0,0) corner.
inline std::vector<RocPoint> roc_curve(const std::vector<double>& honest, const std::vector<double>& attacked) {
  if (honest.empty() || attacked.empty()) throw std::invalid_argument("roc_curve: empty score set");
  std::vector<std::pair<double, int>> all;
  for (double s : honest) all.emplace_back(s, 0);
  for (double s : attacked) all.emplace_back(s, 1);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double fp = 0, tp = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) (all[j].second ? tp : fp) += 1, ++j;
    out.push_back({all[i].first, fp / honest.size(), tp / attacked.size()});
    i = j;
  }
  return out;
}

// --- retention ---------------------------------------------------------------

struct StreamBlock {
  CellTable counts;
  std::uint64_t N = 0;
  bool attacked = false;
  double leak = 0.0;  // bits per emitted pulse
  bool alarm = false;
};

struct Retention {
  double with_detector = 0.0;
  double without_detector = 0.0;
  double discard_rate = 0.0;  // alarmed honest / honest
  double r0 = 0.0;            // reference rate per pulse
};

/// Per-block accounting. r0 is the honest reference rate per pulse.
inline Retention retained_fraction(const std::vector<StreamBlock>& s, double r0) {
  if (s.empty()) throw std::invalid_argument("retained_fraction: empty stream");
  Retention out;
  out.r0 = r0;
  double all = 0, with = 0, without = 0, honest = 0, discarded = 0;
  for (const auto& b : s) {
    const double n = static_cast<double>(b.N);
    const double r_true = b.attacked ? attacked_secret_fraction(r0, b.leak) : r0;
    all += n * r0;
    without += n * r_true;
    if (!b.alarm) with += n * r_true;
    if (!b.attacked) honest += 1, discarded += b.alarm;
  }
  out.with_detector = all > 0 ? with / all : 0.0;
  out.without_detector = all > 0 ? without / all : 0.0;
  out.discard_rate = honest > 0 ? discarded / honest : 0.0;
  return out;
}

/// Pooled accounting: the finite-key rate is evaluated once on the
/// concatenated statistics of the kept blocks, and the eavesdropper's
/// knowledge of every kept attacked block is subtracted. The reference is
/// the pooled rate of the honest blocks of the same stream.
inline Retention pooled_retained_fraction(const std::vector<StreamBlock>& s, const DecoyConfig& d,
                                          const EpsilonBudget& eps, const KeyParams& kp = {}) {
  if (s.empty()) throw std::invalid_argument("pooled_retained_fraction: empty stream");
  CellTable honest_t, all_t, kept_t;
  double n_all = 0, leak_all = 0, leak_kept = 0, honest = 0, discarded = 0;
  bool any_kept = false, any_honest = false;
  for (const auto& b : s) {
    const double n = static_cast<double>(b.N);
    n_all += n;
    all_t += b.counts;
    if (b.attacked) leak_all += b.leak * n;
    else honest_t += b.counts, any_honest = true, honest += 1, discarded += b.alarm;
    if (!b.alarm) {
      kept_t += b.counts;
      any_kept = true;
      if (b.attacked) leak_kept += b.leak * n;
    }
  }
  if (!any_honest) throw std::invalid_argument("pooled_retained_fraction: no honest blocks for the reference");
  Retention out;
  out.r0 = secret_fraction(honest_t, d, eps, kp).r;
  const double denom = n_all * out.r0;
  if (denom <= 0) return out;
  const double bits_all = std::max(0.0, n_all * secret_fraction(all_t, d, eps, kp).r - leak_all);
  const double bits_kept =
      any_kept ? std::max(0.0, static_cast<double>(kept_t.emitted()) * secret_fraction(kept_t, d, eps, kp).r - leak_kept)
               : 0.0;
  out.without_detector = bits_all / denom;
  out.with_detector = bits_kept / denom;
  out.discard_rate = honest > 0 ? discarded / honest : 0.0;
  return out;
}

// --- latency -------------------------------------------------------------------

struct LatencyReport {
  double mean_delay = 0.0;  // over detected trials
  int detected = 0;
  int censored = 0;
};

/// alarms[k] is the alarm sequence of trial k; onset[k] its attack start.
inline LatencyReport detection_latency(const std::vector<std::vector<bool>>& alarms, const std::vector<std::size_t>& onset) {
  if (alarms.size() != onset.size()) throw std::invalid_argument("detection_latency: size mismatch");
  LatencyReport r;
  double sum = 0;
  for (std::size_t k = 0; k < alarms.size(); ++k) {
    std::optional<std::size_t> hit;
    for (std::size_t t = onset[k]; t < alarms[k].size(); ++t)
      if (alarms[k][t]) {
        hit = t;
        break;
      }
    if (hit) sum += static_cast<double>(*hit - onset[k]), ++r.detected;
    else ++r.censored;
  }
  r.mean_delay = r.detected ? sum / r.detected : std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// CUSUM alarm sequence over a score stream starting from S = 0. The chart
/// restarts after each alarm.
inline std::vector<bool> cusum_alarms(CusumState st, const std::vector<double>& scores) {
  st.S = 0;
  std::vector<bool> out;
  out.reserve(scores.size());
  for (double s : scores) {
    out.push_back(cusum_step(st, s));
    if (out.back()) st.S = 0;
  }
  return out;
}

// --- attribution -------------------------------------------------------------

struct EvalWindow {
  std::vector<FeatureVector> steps;  // normalized, oldest first
  int label = 0;
};

inline std::vector<double> score_all(const DefenderModel& m, const std::vector<EvalWindow>& set) {
  std::vector<double> s(set.size());
  parallel_for(set.size(), [&](std::size_t i) { s[i] = m.mixed_score(set[i].steps); });
  return s;
}

inline double auc_of(const std::vector<EvalWindow>& set, const std::vector<double>& s) {
  std::vector<double> h, a;
  for (std::size_t i = 0; i < set.size(); ++i) (set[i].label ? a : h).push_back(s[i]);
  return auc(h, a);
}

/// Baseline AUC minus AUC after permuting one feature column across the set
/// (all window steps move together).
inline std::vector<double> permutation_importance(const DefenderModel& m, const std::vector<EvalWindow>& set,
                                                  std::uint64_t seed) {
  const double base = auc_of(set, score_all(m, set));
  std::vector<double> out(kFeatures);
  for (int j = 0; j < kFeatures; ++j) {
    std::vector<std::size_t> perm(set.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    CounterRng rng(derive_key(seed, static_cast<std::uint64_t>(j)));
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<EvalWindow> shuffled = set;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& src = set[perm[i]].steps;
      auto& dst = shuffled[i].steps;
      // Align from the newest step; missing source steps leave the value in place.
      for (std::size_t k = 0; k < dst.size() && k < src.size(); ++k)
        dst[dst.size() - 1 - k][j] = src[src.size() - 1 - k][j];
    }
    out[j] = base - auc_of(shuffled, score_all(m, shuffled));
  }
  return out;
}

}  // namespace qkdids
