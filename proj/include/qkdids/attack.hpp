#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qkdids/finite_key.hpp"
#include "qkdids/physics.hpp"

namespace qkdids {

struct NullAttack {
  bool operator==(const NullAttack&) const = default;
};
struct TimeShift {
  double dt = 0.0;  // ps
  bool operator==(const TimeShift&) const = default;
};
struct Blinding {
  double I0 = 0.0;
  double t1 = 0.0;  // ps, within the gate window
  double t2 = 0.0;
  bool operator==(const Blinding&) const = default;
};
struct PNS {
  double f_split = 0.0;
  bool operator==(const PNS&) const = default;
};
struct Trojan {
  double rho = 0.0;
  double P_ret = 0.0;
  bool operator==(const Trojan&) const = default;
};

using AttackParams = std::variant<NullAttack, TimeShift, Blinding, PNS, Trojan>;

enum class Family : int { Null = 0, TimeShift = 1, Blinding = 2, PNS = 3, Trojan = 4 };

inline constexpr std::array<Family, 4> kAttackFamilies = {Family::TimeShift, Family::Blinding, Family::PNS,
                                                          Family::Trojan};

inline Family family_of(const AttackParams& a) { return static_cast<Family>(a.index()); }

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Null: return "null";
    case Family::TimeShift: return "timeshift";
    case Family::Blinding: return "blinding";
    case Family::PNS: return "pns";
    case Family::Trojan: return "trojan";
  }
  return "null";
}

inline std::optional<Family> parse_family(std::string_view s) {
  for (Family f : {Family::Null, Family::TimeShift, Family::Blinding, Family::PNS, Family::Trojan})
    if (family_name(f) == s) return f;
  if (s == "honest" || s == "none") return Family::Null;
  return std::nullopt;
}

/// Hardware and monitoring limits on the attacker. The last two fields
/// describe the block whose decoy statistics the PNS attack must survive.
struct FeasibleSet {
  double dt_max = 150.0;
  double I_max = 1.0;
  double I_th = 0.3;
  double P_max = 1.0;
  double rho_max = 0.5;
  double kappa_tha = 1.0;
  double eps_decoy = 2.5e-11;
  double block_span = 1000.0;  // ps
  double block_pulses = 5e4;

  static FeasibleSet from(const ChannelParams& c, double eps_decoy, double block_span, double block_pulses) {
    return {c.dt_max, c.I_max, c.I_th, c.P_max, c.rho_max, c.kappa_tha, eps_decoy, block_span, block_pulses};
  }

  void validate() const {
    if (!(dt_max >= 0.0 && I_max > 0.0 && I_th > 0.0 && I_th < I_max && P_max > 0.0 && rho_max > 0.0 &&
          rho_max <= 1.0 && kappa_tha >= 0.0 && block_span > 0.0 && block_pulses >= 1.0))
      throw std::invalid_argument("FeasibleSet: bounds out of range");
    if (!(eps_decoy > 0.0 && eps_decoy <= 0.1)) throw std::invalid_argument("FeasibleSet: eps_decoy outside (0,0.1]");
  }
  bool operator==(const FeasibleSet&) const = default;
};

/// Per-block channel behavior seen by the simulator once an attack is applied.
struct EffectiveChannel {
  double eta0 = 0.0;
  double eta1 = 0.0;
  double dt_applied = 0.0;
  double ctl_fraction = 0.0;
  double dc_suppression = 1.0;
  double y_mult_boost = 0.0;
  double y1_block = 0.0;
  double proxy_bias = 0.0;
  double proxy_Pret = 0.0;
};

// --- PNS gain bookkeeping -------------------------------------------------

/// Gain under PNS: singles blocked with probability b, multi-photon pulses
/// forwarded losslessly with probability f.
inline double pns_gain(double mu, double f, double b, double eta, double p_d) {
  const double P0 = std::exp(-mu);
  const double P1 = mu * P0;
  const double Y0 = yield_n(0, eta, p_d);
  const double Y1 = yield_n(1, eta, p_d);
  const double Q = gain(mu, eta, p_d);
  const double multi = std::max(0.0, Q - P0 * Y0 - P1 * Y1);  // sum_{n>=2} P(n) Y_n
  const double p_multi = std::max(0.0, 1.0 - P0 - P1);
  return P0 * Y0 + P1 * Y1 * (1.0 - b) + f * p_multi + (1.0 - f) * multi;
}

inline double pns_error_gain(double mu, double f, double b, double eta, double p_d, double e_d) {
  return e_d * (pns_gain(mu, f, b, eta, p_d) - p_d) + 0.5 * p_d;
}

/// Single-photon blocking fraction that restores the signal gain.
inline double pns_solve_block(double f_split, const ChannelParams& c, const DecoyConfig& d) {
  if (!(f_split >= 0.0 && f_split <= 1.0)) throw std::invalid_argument("pns_solve_block: f_split outside [0,1]");
  const double eta = c.eta();
  const double target = gain(d.mu_s, eta, c.p_d);
  auto excess = [&](double b) { return pns_gain(d.mu_s, f_split, b, eta, c.p_d) - target; };
  if (excess(0.0) <= 0.0) return 0.0;
  if (excess(1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;  // excess(lo) > 0 > excess(hi)
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Expected sifted Z emissions per intensity for a block of the feasible set's size.
inline double expected_sifted_z(const FeasibleSet& fs, const DecoyConfig& d, int mu) {
  return fs.block_pulses * d.p(mu) * d.p_Z * d.p_Z;
}

/// Bands an honest block of the feasible set's size would produce for each
/// Z-basis gain and error gain.
struct PnsBands {
  std::array<Interval, kIntensities> q;
  std::array<Interval, kIntensities> eq;
};

inline PnsBands pns_bands(const FeasibleSet& fs, const ChannelParams& c, const DecoyConfig& d) {
  const double eta = c.eta();
  const double eps = fs.eps_decoy / 6.0;
  PnsBands bands;
  for (int i = 0; i < kIntensities; ++i) {
    const double mu = d.mu(i);
    const auto n = static_cast<std::uint64_t>(std::max(1.0, std::round(expected_sifted_z(fs, d, i))));
    auto round_k = [n](double rate) {
      return std::min<std::uint64_t>(n, static_cast<std::uint64_t>(std::llround(rate * static_cast<double>(n))));
    };
    bands.q[i] = clopper_pearson(round_k(gain(mu, eta, c.p_d)), n, eps);
    bands.eq[i] = clopper_pearson(round_k(error_gain(mu, eta, c.p_d, c.e_d)), n, eps);
  }
  return bands;
}

/// Whether PNS at f_split keeps every Z-basis gain and error gain inside its band.
inline bool pns_band_consistent(double f_split, const PnsBands& bands, const ChannelParams& c,
                                const DecoyConfig& d) {
  const double eta = c.eta();
  const double b = pns_solve_block(f_split, c, d);
  for (int i = 0; i < kIntensities; ++i) {
    const double mu = d.mu(i);
    if (!bands.q[i].contains(pns_gain(mu, f_split, b, eta, c.p_d))) return false;
    if (!bands.eq[i].contains(pns_error_gain(mu, f_split, b, eta, c.p_d, c.e_d))) return false;
  }
  return true;
}

inline bool pns_band_consistent(double f_split, const FeasibleSet& fs, const ChannelParams& c,
                                const DecoyConfig& d) {
  return pns_band_consistent(f_split, pns_bands(fs, c, d), c, d);
}

// --- projection ------------------------------------------------------------

inline double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

inline AttackParams project(const AttackParams& a, const FeasibleSet& fs, const ChannelParams& c,
                            const DecoyConfig& d) {
  struct Visitor {
    const FeasibleSet& fs;
    const ChannelParams& c;
    const DecoyConfig& d;
    AttackParams operator()(const NullAttack& n) const { return n; }
    AttackParams operator()(const TimeShift& t) const {
      return TimeShift{std::clamp(finite_or_zero(t.dt), -fs.dt_max, fs.dt_max)};
    }
    AttackParams operator()(const Blinding& b) const {
      double t1 = std::clamp(finite_or_zero(b.t1), 0.0, fs.block_span);
      double t2 = std::clamp(finite_or_zero(b.t2), 0.0, fs.block_span);
      if (t1 > t2) std::swap(t1, t2);
      return Blinding{std::clamp(finite_or_zero(b.I0), 0.0, fs.I_max), t1, t2};
    }
    AttackParams operator()(const PNS& p) const {
      const double f = std::clamp(finite_or_zero(p.f_split), 0.0, 1.0);
      if (f == 0.0) return PNS{f};
      const PnsBands bands = pns_bands(fs, c, d);
      if (pns_band_consistent(f, bands, c, d)) return PNS{f};
      double lo = 0.0, hi = f;  // lo consistent (f = 0 is the honest model), hi not
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pns_band_consistent(mid, bands, c, d) ? lo : hi) = mid;
      }
      return PNS{lo};
    }
    AttackParams operator()(const Trojan& t) const {
      double rho = std::clamp(finite_or_zero(t.rho), 0.0, fs.rho_max);
      if (fs.kappa_tha * rho > fs.P_max) rho = fs.P_max / fs.kappa_tha;
      const double p = std::clamp(finite_or_zero(t.P_ret), fs.kappa_tha * rho, fs.P_max);
      return Trojan{rho, p};
    }
  };
  return std::visit(Visitor{fs, c, d}, a);
}

inline std::vector<double> attack_vector(const AttackParams& a) {
  return std::visit(
      [](const auto& x) -> std::vector<double> {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TimeShift>) return {x.dt};
        else if constexpr (std::is_same_v<T, Blinding>) return {x.I0, x.t1, x.t2};
        else if constexpr (std::is_same_v<T, PNS>) return {x.f_split};
        else if constexpr (std::is_same_v<T, Trojan>) return {x.rho, x.P_ret};
        else return {};
      },
      a);
}

inline std::size_t family_dim(Family f) {
  switch (f) {
    case Family::TimeShift: return 1;
    case Family::Blinding: return 3;
    case Family::PNS: return 1;
    case Family::Trojan: return 2;
    default: return 0;
  }
}

inline AttackParams attack_from_vector(Family f, const std::vector<double>& v) {
  if (v.size() != family_dim(f)) throw std::invalid_argument("attack_from_vector: dimension mismatch");
  switch (f) {
    case Family::TimeShift: return TimeShift{v[0]};
    case Family::Blinding: return Blinding{v[0], v[1], v[2]};
    case Family::PNS: return PNS{v[0]};
    case Family::Trojan: return Trojan{v[0], v[1]};
    default: return NullAttack{};
  }
}

/// Feasible box of a family in parameter coordinates: (lower, upper) per axis.
inline std::vector<std::pair<double, double>> family_box(Family f, const FeasibleSet& fs) {
  switch (f) {
    case Family::TimeShift: return {{-fs.dt_max, fs.dt_max}};
    case Family::Blinding: return {{0.0, fs.I_max}, {0.0, fs.block_span}, {0.0, fs.block_span}};
    case Family::PNS: return {{0.0, 1.0}};
    case Family::Trojan: return {{0.0, fs.rho_max}, {0.0, fs.P_max}};
    default: return {};
  }
}

inline bool is_feasible(const AttackParams& a, const FeasibleSet& fs, const ChannelParams& c,
                        const DecoyConfig& d) {
  const AttackParams p = project(a, fs, c, d);
  if (p.index() != a.index()) return false;
  const auto va = attack_vector(a), vp = attack_vector(p);
  for (std::size_t i = 0; i < va.size(); ++i)
    if (!(std::abs(va[i] - vp[i]) <= 1e-6)) return false;
  return true;
}

// --- effects -----------------------------------------------------------------

inline double blinding_control(const Blinding& b, const FeasibleSet& fs) {
  const double level = std::clamp((b.I0 - fs.I_th) / (fs.I_max - fs.I_th), 0.0, 1.0);
  return level * (b.t2 - b.t1) / fs.block_span;
}

inline EffectiveChannel apply_attack(const AttackParams& a, const ChannelParams& c, const DecoyConfig& d,
                                     const FeasibleSet& fs) {
  if (!is_feasible(a, fs, c, d)) throw std::invalid_argument("apply_attack: infeasible attack");
  const double eta = c.eta();
  EffectiveChannel e;
  e.eta0 = e.eta1 = eta;
  if (const auto* t = std::get_if<TimeShift>(&a)) {
    const double s2 = 2.0 * c.sigma_g * c.sigma_g;
    const double c0 = -0.5 * c.delta_det, c1 = 0.5 * c.delta_det;
    e.eta0 = eta * std::exp(-(t->dt - c0) * (t->dt - c0) / s2) / std::exp(-c0 * c0 / s2);
    e.eta1 = eta * std::exp(-(t->dt - c1) * (t->dt - c1) / s2) / std::exp(-c1 * c1 / s2);
    e.eta0 = std::min(1.0, e.eta0);
    e.eta1 = std::min(1.0, e.eta1);
    e.dt_applied = t->dt;
  } else if (const auto* b = std::get_if<Blinding>(&a)) {
    e.ctl_fraction = blinding_control(*b, fs);
    e.dc_suppression = 1.0 - e.ctl_fraction;
    e.proxy_bias = b->I0 * (b->t2 - b->t1) / fs.block_span;
  } else if (const auto* p = std::get_if<PNS>(&a)) {
    e.y_mult_boost = p->f_split;
    e.y1_block = pns_solve_block(p->f_split, c, d);
  } else if (const auto* tr = std::get_if<Trojan>(&a)) {
    e.proxy_Pret = tr->P_ret;
  }
  return e;
}

/// Ground-truth secret bits per emitted pulse known to the eavesdropper.
inline double eve_leakage(const AttackParams& a, const ChannelParams& c, const DecoyConfig& d,
                          const FeasibleSet& fs) {
  const double eta = c.eta();
  const double Qs = gain(d.mu_s, eta, c.p_d);
  double leak = 0.0;
  if (const auto* t = std::get_if<TimeShift>(&a)) {
    const EffectiveChannel e = apply_attack(*t, c, d, fs);
    const double sum = e.eta0 + e.eta1;
    const double p_mis = sum > 0.0 ? e.eta0 / sum : 0.5;
    leak = Qs * (1.0 - binary_entropy(p_mis));
  } else if (const auto* b = std::get_if<Blinding>(&a)) {
    leak = Qs * blinding_control(*b, fs);
  } else if (const auto* p = std::get_if<PNS>(&a)) {
    const double P0 = std::exp(-d.mu_s);
    leak = (1.0 - P0 - d.mu_s * P0) * p->f_split;
  } else if (const auto* tr = std::get_if<Trojan>(&a)) {
    leak = tr->rho * Qs;
  }
  return std::max(0.0, leak) * d.p_s * d.p_Z;
}

/// Normalized attack magnitude in [0, 1].
inline double attack_cost(const AttackParams& a, const FeasibleSet& fs) {
  if (const auto* t = std::get_if<TimeShift>(&a)) return fs.dt_max > 0.0 ? std::abs(t->dt) / fs.dt_max : 0.0;
  if (const auto* b = std::get_if<Blinding>(&a)) return b->I0 / fs.I_max * (b->t2 - b->t1) / fs.block_span;
  if (const auto* p = std::get_if<PNS>(&a)) return p->f_split;
  if (const auto* tr = std::get_if<Trojan>(&a)) return tr->rho / fs.rho_max;
  return 0.0;
}

}  // namespace qkdids
