#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include <boost/math/special_functions/beta.hpp>

#include "qkdids/counts.hpp"
#include "qkdids/physics.hpp"

namespace qkdids {

/// Security-parameter allocation. The default splits 1e-10 equally four ways
/// and reuses the parameter-estimation share for the decoy intervals.
struct EpsilonBudget {
  double eps_total = 1e-10;
  double eps_EC = 2.5e-11;
  double eps_PE = 2.5e-11;
  double eps_PA = 2.5e-11;
  double eps_EAT = 2.5e-11;
  double eps_decoy = 2.5e-11;

  static EpsilonBudget split_equally(double total) {
    const double q = total / 4.0;
    return {total, q, q, q, q, q};
  }

  void validate() const {
    for (double e : {eps_total, eps_EC, eps_PE, eps_PA, eps_EAT, eps_decoy})
      if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("EpsilonBudget: entries must be positive");
    const double sum = eps_EC + eps_PE + eps_PA + eps_EAT;
    if (std::abs(sum - eps_total) > 1e-9 * eps_total)
      throw std::invalid_argument("EpsilonBudget: components do not sum to eps_total");
    if (eps_decoy > eps_PE) throw std::invalid_argument("EpsilonBudget: eps_decoy > eps_PE");
  }

  bool operator==(const EpsilonBudget&) const = default;
};

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
  bool contains(double x) const { return x >= lower && x <= upper; }
};

/// Exact two-sided binomial interval, eps/2 in each tail.
inline Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double eps) {
  if (n == 0 || k > n) throw std::invalid_argument("clopper_pearson: need 0 <= k <= n, n >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("clopper_pearson: eps outside (0,1)");
  const double a = eps / 2.0;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  Interval iv;
  iv.lower = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, a);
  iv.upper = k == n ? 1.0 : boost::math::ibetac_inv(kd + 1.0, nd - kd, a);
  return iv;
}

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binary_entropy: p outside [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

inline double ec_leakage(double n_bits, double E_obs, double f_EC, double eps_EC) {
  if (!(E_obs >= 0.0 && E_obs <= 0.5)) throw std::invalid_argument("ec_leakage: E_obs outside [0,0.5]");
  return f_EC * n_bits * binary_entropy(E_obs) + std::log2(1.0 / eps_EC);
}

inline double eat_penalty(double eps_EAT, double n, double c_EAT) {
  if (!(n >= 1.0)) throw std::invalid_argument("eat_penalty: n < 1");
  if (!(eps_EAT > 0.0)) throw std::invalid_argument("eat_penalty: eps_EAT <= 0");
  return c_EAT * std::sqrt(n * std::log(2.0 / eps_EAT));
}

/// Vacuum error rate used in the phase-error bound.
inline constexpr double kVacuumError = 0.5;

struct DecoyBounds {
  double Y0_L = 0.0;
  double Y0_U = 0.0;
  double Y1_L = 0.0;
  double e1_U = 0.5;
  double s1_ZL = 0.0;
  bool vacuous = false;  // Y1_L hit zero; e1_U pinned at 0.5
};

/// Rate intervals feeding the closed-form bounds.
struct DecoyRates {
  Interval Q_s, Q_w, EQ_w, Y0;
};

inline DecoyBounds decoy_bounds_from_rates(const DecoyRates& r, const DecoyConfig& d) {
  const double ms = d.mu_s, mw = d.mu_w;
  DecoyBounds b;
  b.Y0_L = r.Y0.lower;
  b.Y0_U = r.Y0.upper;
  const double y1 = (ms / (ms * mw - mw * mw)) *
                    (r.Q_w.lower * std::exp(mw) - r.Q_s.upper * std::exp(ms) * (mw * mw) / (ms * ms) -
                     ((ms * ms - mw * mw) / (ms * ms)) * b.Y0_U);
  b.Y1_L = std::clamp(y1, 0.0, 1.0);
  if (b.Y1_L <= 0.0) {
    b.e1_U = 0.5;
    b.vacuous = true;
    return b;
  }
  const double e1 = (r.EQ_w.upper * std::exp(mw) - kVacuumError * b.Y0_L) / (mw * b.Y1_L);
  b.e1_U = std::clamp(e1, 0.0, 0.5);
  return b;
}

inline Interval cell_rate(std::uint64_t k, std::uint64_t n, double eps) {
  if (n == 0) throw std::invalid_argument("decoy_bounds: empty cell");
  return clopper_pearson(k, n, eps);
}

/// Finite-size decoy bounds from Z-basis counts. Four intervals are formed
/// (signal gain, weak gain, weak error gain, pooled vacuum gain), each at
/// eps_decoy / 4.
inline DecoyBounds decoy_bounds(const CellTable& t, const DecoyConfig& d, double eps_decoy) {
  const double e = eps_decoy / 4.0;
  const auto& s = t.at(kSignal, kZ);
  const auto& w = t.at(kWeak, kZ);
  CellCounts v = t.at(kVacuum, kZ);
  v += t.at(kVacuum, kX);
  DecoyRates r;
  r.Q_s = cell_rate(s.detected, s.sifted, e);
  r.Q_w = cell_rate(w.detected, w.sifted, e);
  r.EQ_w = cell_rate(w.errors, w.sifted, e);
  r.Y0 = cell_rate(v.detected, v.sifted, e);
  DecoyBounds b = decoy_bounds_from_rates(r, d);
  b.s1_ZL = static_cast<double>(s.sifted) * std::exp(-d.mu_s) * d.mu_s * b.Y1_L;
  return b;
}

struct SecretFractionReport {
  double r = 0.0;
  double s1_ZL = 0.0;
  double e1_U = 0.5;
  double lambda_EC = 0.0;
  double delta_EAT = 0.0;
  double n_sift_Z = 0.0;  // sifted signal-Z emissions
  double n_key = 0.0;     // sifted signal-Z detections (raw key length)
  double E_obs = 0.0;
  double raw = 0.0;       // bracket before the clamp, per pulse
};

struct KeyParams {
  double f_EC = 1.16;
  double c_EAT = 4.0;
  bool operator==(const KeyParams&) const = default;
};

/// Per-emitted-pulse secret fraction. The error-correction and EAT terms
/// scale with the raw key length (sifted signal-Z detections).
inline SecretFractionReport secret_fraction(const CellTable& t, const DecoyConfig& d,
                                            const EpsilonBudget& eps, const KeyParams& kp = {}) {
  const double N = static_cast<double>(t.emitted());
  if (!(N >= 1.0)) throw std::invalid_argument("secret_fraction: empty block");
  const DecoyBounds b = decoy_bounds(t, d, eps.eps_decoy);
  const auto& s = t.at(kSignal, kZ);
  SecretFractionReport rep;
  rep.s1_ZL = b.s1_ZL;
  rep.e1_U = b.e1_U;
  rep.n_sift_Z = static_cast<double>(s.sifted);
  rep.n_key = static_cast<double>(s.detected);
  rep.E_obs = s.detected > 0 ? std::min(0.5, static_cast<double>(s.errors) / rep.n_key) : 0.5;
  rep.lambda_EC = ec_leakage(rep.n_key, rep.E_obs, kp.f_EC, eps.eps_EC);
  rep.delta_EAT = eat_penalty(eps.eps_EAT, std::max(1.0, rep.n_key), kp.c_EAT);
  rep.raw = (b.s1_ZL * (1.0 - binary_entropy(b.e1_U)) - rep.lambda_EC - rep.delta_EAT) / N;
  rep.r = std::max(0.0, rep.raw);
  return rep;
}

inline double attacked_secret_fraction(double r, double leak) {
  if (!(leak >= 0.0)) throw std::invalid_argument("attacked_secret_fraction: negative leak");
  return std::max(0.0, r - leak);
}

inline double attacked_secret_fraction(const CellTable& t, const DecoyConfig& d, const EpsilonBudget& eps,
                                       double leak, const KeyParams& kp = {}) {
  return attacked_secret_fraction(secret_fraction(t, d, eps, kp).r, leak);
}

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1000.0;
  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) throw std::invalid_argument("LossWeights: negative weight");
  }
  bool operator==(const LossWeights&) const = default;
};

inline double operational_loss(bool alarm_honest, bool alarm_attack, double r0, double r_a,
                               const LossWeights& w) {
  w.validate();
  if (r0 < 0.0 || r_a < 0.0) throw std::invalid_argument("operational_loss: negative rate");
  double loss = alarm_honest ? w.beta : 0.0;
  if (!alarm_attack) loss += w.alpha + w.gamma * std::max(0.0, r0 - r_a);
  return loss;
}

}  // namespace qkdids
