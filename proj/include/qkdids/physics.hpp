#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "qkdids/rng.hpp"

namespace qkdids {

/// Fiber channel and detector parameterization. Power-like quantities
/// (I_*, P_*, kappa_tha) share one arbitrary unit.
struct ChannelParams {
  double L = 50.0;             // km
  double alpha = 0.2;          // dB/km
  double loss_offset_db = 0.0; // extra insertion loss, set by domain randomization
  double p_d = 1e-6;           // dark-count probability per gate
  double e_d = 0.01;           // misalignment error probability
  double sigma_t = 80.0;       // timing jitter, ps
  double delta_det = 30.0;     // inter-detector gate-center offset, ps
  double sigma_g = 100.0;      // gate-profile width, ps
  double dt_max = 150.0;       // time-shift bound, ps
  double I_max = 1.0;          // safe-illumination ceiling
  double I_th = 0.3;           // blinding onset
  double P_max = 1.0;          // THA return-power ceiling
  double rho_max = 0.5;        // THA correlation ceiling
  double kappa_tha = 1.0;      // minimum return power per unit correlation
  // Monitor read-out noise (standard deviations of the honest proxies).
  double sigma_bias = 0.05;
  double sigma_pret = 0.05;
  double sigma_temp = 0.05;

  double eta() const;
  void validate() const;

  bool operator==(const ChannelParams&) const = default;
};

/// Three-intensity decoy configuration; index 0 = signal, 1 = weak, 2 = vacuum.
struct DecoyConfig {
  double mu_s = 0.5;
  double mu_w = 0.1;
  double mu_v = 0.0;
  double p_s = 0.7;
  double p_w = 0.2;
  double p_v = 0.1;
  double p_Z = 0.9;

  double mu(int i) const { return i == 0 ? mu_s : (i == 1 ? mu_w : mu_v); }
  double p(int i) const { return i == 0 ? p_s : (i == 1 ? p_w : p_v); }
  void validate() const;

  bool operator==(const DecoyConfig&) const = default;
};

inline double transmittance(double L, double alpha) {
  if (!(L >= 0.0)) throw std::invalid_argument("transmittance: negative distance");
  if (!(alpha > 0.0)) throw std::invalid_argument("transmittance: attenuation must be positive");
  return std::pow(10.0, -alpha * L / 10.0);
}

inline double ChannelParams::eta() const {
  const double db = alpha * L + loss_offset_db;
  return std::min(1.0, std::pow(10.0, -db / 10.0));
}

inline void ChannelParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (double v : {L, alpha, loss_offset_db, p_d, e_d, sigma_t, delta_det, sigma_g, dt_max, I_max,
                   I_th, P_max, rho_max, kappa_tha, sigma_bias, sigma_pret, sigma_temp}) {
    if (!finite(v)) throw std::invalid_argument("ChannelParams: non-finite field");
  }
  if (L < 0.0) throw std::invalid_argument("ChannelParams: L < 0");
  if (alpha <= 0.0) throw std::invalid_argument("ChannelParams: alpha <= 0");
  if (p_d < 0.0 || p_d >= 1.0) throw std::invalid_argument("ChannelParams: p_d outside [0,1)");
  if (e_d < 0.0 || e_d > 0.5) throw std::invalid_argument("ChannelParams: e_d outside [0,0.5]");
  if (sigma_t <= 0.0 || sigma_g <= 0.0) throw std::invalid_argument("ChannelParams: widths must be positive");
  if (dt_max < 0.0) throw std::invalid_argument("ChannelParams: dt_max < 0");
  if (!(I_th > 0.0 && I_th < I_max)) throw std::invalid_argument("ChannelParams: need 0 < I_th < I_max");
  if (!(rho_max > 0.0 && rho_max <= 1.0)) throw std::invalid_argument("ChannelParams: rho_max outside (0,1]");
  if (P_max <= 0.0 || kappa_tha < 0.0) throw std::invalid_argument("ChannelParams: THA bounds");
  if (sigma_bias < 0.0 || sigma_pret < 0.0 || sigma_temp < 0.0)
    throw std::invalid_argument("ChannelParams: negative monitor noise");
}

inline void DecoyConfig::validate() const {
  if (!(mu_s > mu_w && mu_w > mu_v && mu_v == 0.0))
    throw std::invalid_argument("DecoyConfig: need mu_s > mu_w > mu_v = 0");
  for (double p : {p_s, p_w, p_v})
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("DecoyConfig: probability outside (0,1)");
  if (std::abs(p_s + p_w + p_v - 1.0) > 1e-12)
    throw std::invalid_argument("DecoyConfig: intensity probabilities must sum to 1");
  if (!(p_Z > 0.0 && p_Z < 1.0)) throw std::invalid_argument("DecoyConfig: p_Z outside (0,1)");
}

/// n-photon yield, clamped to 1.
inline double yield_n(int n, double eta, double p_d) {
  if (n < 0) throw std::invalid_argument("yield_n: negative photon number");
  return std::min(1.0, 1.0 - std::pow(1.0 - eta, n) + p_d);
}

/// n-photon error rate: e_d + (p_d/2)/Y_n, clamped to [0, 0.5].
inline double error_n(int n, double eta, double p_d, double e_d) {
  const double y = yield_n(n, eta, p_d);
  if (!(y > 0.0)) throw std::domain_error("error_n: zero yield");
  return std::clamp(e_d + 0.5 * p_d / y, 0.0, 0.5);
}

/// Poisson-mixed gain, summed in closed form.
inline double gain(double mu, double eta, double p_d) {
  if (mu < 0.0) throw std::invalid_argument("gain: negative intensity");
  return 1.0 - std::exp(-eta * mu) + p_d;
}

/// Poisson-mixed error gain: e_d (1 - e^{-eta mu}) + p_d/2.
inline double error_gain(double mu, double eta, double p_d, double e_d) {
  if (mu < 0.0) throw std::invalid_argument("error_gain: negative intensity");
  return e_d * (1.0 - std::exp(-eta * mu)) + 0.5 * p_d;
}

inline double poisson_pmf(int n, double mu) {
  if (n < 0) return 0.0;
  if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(mu) - mu - std::lgamma(n + 1.0));
}

struct RandomizedDomain {
  ChannelParams channel;
  DecoyConfig decoy;
};

/// Per-block domain randomization: insertion loss +-1 dB, e_d +-0.4 pp,
/// sigma_t +-20 ps, decoy probabilities +-0.05 (renormalized), p_d
/// log-uniform in [1e-7, 1e-6].
inline RandomizedDomain randomize_domain(const ChannelParams& base, const DecoyConfig& decoy,
                                         std::uint64_t seed) {
  CounterRng rng(derive_key(seed, 0x646f6d61696eULL));
  RandomizedDomain out{base, decoy};
  out.channel.loss_offset_db = base.loss_offset_db + rng.uniform(-1.0, 1.0);
  out.channel.e_d = std::max(0.001, base.e_d + rng.uniform(-0.004, 0.004));
  out.channel.sigma_t = std::max(1.0, base.sigma_t + rng.uniform(-20.0, 20.0));
  out.channel.p_d = std::pow(10.0, rng.uniform(-7.0, -6.0));

  double ps = std::max(1e-3, decoy.p_s + rng.uniform(-0.05, 0.05));
  double pw = std::max(1e-3, decoy.p_w + rng.uniform(-0.05, 0.05));
  double pv = std::max(1e-3, decoy.p_v + rng.uniform(-0.05, 0.05));
  const double total = ps + pw + pv;
  ps /= total;
  pw /= total;
  const double sw = ps + pw;
  pv = 1.0 - sw;  // exact when sw >= 0.5, so the three sum to exactly 1
  out.decoy.p_s = ps;
  out.decoy.p_w = pw;
  out.decoy.p_v = pv;
  return out;
}

}  // namespace qkdids
