#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qkdids/physics.hpp"
#include "qkdids/simulator.hpp"

namespace qkdids {

inline constexpr int kFeatures = 16;
using FeatureVector = std::array<double, kFeatures>;

namespace feature {
enum : int {
  kGainSZ = 0, kGainSX, kGainWZ, kGainWX, kGainVZ, kGainVX,
  kErrSZ, kErrWZ,
  kResidualNorm,
  kTimeMean, kTimeSkew, kTimeKurt, kGateAsym,
  kDetImbalance, kDoubleClick,
  kProxy,
};
}

inline const std::array<const char*, kFeatures>& feature_names() {
  static const std::array<const char*, kFeatures> names = {
      "gain_s_z", "gain_s_x", "gain_w_z", "gain_w_x", "gain_v_z", "gain_v_x", "err_s_z",   "err_w_z",
      "res_norm", "t_mean",   "t_skew",   "t_kurt",   "gate_asym", "det_imb", "dbl_click", "proxy"};
  return names;
}

class DegenerateBlock : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Residuals are taken against the closed-form honest model (c, d).
inline FeatureVector extract_features(const BlockRecord& b, const ChannelParams& c, const DecoyConfig& d) {
  const std::uint64_t total = b.total_detections();
  if (total == 0) throw DegenerateBlock("extract_features: block has no detections");
  const double eta = c.eta();
  FeatureVector x{};

  auto rate = [](std::uint64_t k, std::uint64_t n) { return n ? static_cast<double>(k) / n : 0.0; };
  for (int i = 0; i < kIntensities; ++i) {
    const double q = gain(d.mu(i), eta, c.p_d);
    for (int bs = 0; bs < kBases; ++bs) {
      const CellCounts& cell = b.counts.at(i, bs);
      x[2 * i + bs] = cell.sifted ? rate(cell.detected, cell.sifted) - q : 0.0;
    }
  }
  for (int i = 0; i < 2; ++i) {
    const CellCounts& cell = b.counts.at(i, kZ);
    const double eq = error_gain(d.mu(i), eta, c.p_d, c.e_d);
    x[feature::kErrSZ + i] = cell.sifted ? rate(cell.errors, cell.sifted) - eq : 0.0;
  }
  double ss = 0.0;
  for (int i = 0; i < 8; ++i) ss += x[i] * x[i];
  x[feature::kResidualNorm] = std::sqrt(ss);

  const double n = static_cast<double>(total);
  double mean = 0.0;
  for (int i = 0; i < kTimingBins; ++i) mean += timing_bin_center(i) * b.timing_hist[i];
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, left = 0.0, right = 0.0;
  for (int i = 0; i < kTimingBins; ++i) {
    const double w = static_cast<double>(b.timing_hist[i]);
    const double dx = timing_bin_center(i) - mean;
    m2 += w * dx * dx;
    m3 += w * dx * dx * dx;
    m4 += w * dx * dx * dx * dx;
    (timing_bin_center(i) < 0.0 ? left : right) += w;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  x[feature::kTimeMean] = mean;
  x[feature::kTimeSkew] = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  x[feature::kTimeKurt] = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  x[feature::kGateAsym] = (left - right) / n;

  x[feature::kDetImbalance] = (static_cast<double>(b.det0) - static_cast<double>(b.det1)) / n;
  x[feature::kDoubleClick] = static_cast<double>(b.double_clicks) / n;
  x[feature::kProxy] = b.proxy_bias + b.proxy_Pret + b.proxy_temp;
  return x;
}

/// Uses the honest model recorded in the block's snapshot.
inline FeatureVector extract_features(const BlockRecord& b) {
  return extract_features(b, b.truth.channel, b.truth.decoy);
}

/// Linear-interpolated quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& s, double q) {
  if (s.empty()) throw std::invalid_argument("sorted_quantile: empty");
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

struct Normalizer {
  FeatureVector location{};
  FeatureVector scale{};

  static constexpr double kScaleFloor = 1e-9;
  static constexpr std::size_t kMinSamples = 100;

  static Normalizer fit(const std::vector<FeatureVector>& xs) {
    if (xs.size() < kMinSamples) throw std::invalid_argument("Normalizer::fit: need at least 100 samples");
    Normalizer nz;
    std::vector<double> col(xs.size());
    for (int j = 0; j < kFeatures; ++j) {
      for (std::size_t i = 0; i < xs.size(); ++i) col[i] = xs[i][j];
      std::sort(col.begin(), col.end());
      nz.location[j] = sorted_quantile(col, 0.5);
      const double iqr = sorted_quantile(col, 0.75) - sorted_quantile(col, 0.25);
      nz.scale[j] = std::max(kScaleFloor, iqr / 1.349);
    }
    return nz;
  }

  FeatureVector apply(const FeatureVector& x) const {
    FeatureVector z;
    for (int j = 0; j < kFeatures; ++j) z[j] = (x[j] - location[j]) / scale[j];
    return z;
  }

  bool operator==(const Normalizer&) const = default;
};

inline Normalizer fit_normalizer(const std::vector<FeatureVector>& xs) { return Normalizer::fit(xs); }

}  // namespace qkdids
