#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qkdids/attack.hpp"
#include "qkdids/rng.hpp"

namespace qkdids {

/// Rank-based evolution strategy over one attack family. The mean lives in
/// parameter units; sampling is done in coordinates scaled by the box
/// half-widths so one step size serves every axis.
struct SearchState {
  Family family = Family::TimeShift;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // box half-widths
  double step_size = 0.3;  // in half-width units
  Eigen::MatrixXd covariance;
  Eigen::VectorXd path;  // cumulative step-size path
  int population = 16;
  int generation = 0;
  AttackParams best = NullAttack{};
  double best_loss = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  /// Step along axis i in parameter units.
  double physical_step(std::size_t i) const { return step_size * scale[static_cast<Eigen::Index>(i)]; }
};

inline SearchState search_init(Family f, const FeasibleSet& fs, int p, std::uint64_t seed) {
  if (p < 4) throw std::invalid_argument("search_init: population below 4");
  if (f == Family::Null) throw std::invalid_argument("search_init: nothing to search for the null family");
  const auto box = family_box(f, fs);
  SearchState s;
  s.family = f;
  s.population = p;
  s.seed = seed;
  const auto n = static_cast<Eigen::Index>(box.size());
  s.mean.resize(n);
  s.scale.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.mean[i] = 0.5 * (box[i].first + box[i].second);
    s.scale[i] = 0.5 * (box[i].second - box[i].first);
  }
  s.covariance = Eigen::MatrixXd::Identity(n, n);
  s.path = Eigen::VectorXd::Zero(n);
  return s;
}

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct EsConstants {
  std::vector<double> w;
  double mu_eff, c_sigma, d_sigma, c_mu, chi_n;
};

inline EsConstants es_constants(int p, std::size_t n) {
  EsConstants k;
  const int mu = (p + 1) / 2;
  double sum = 0.0;
  for (int i = 0; i < mu; ++i) {
    k.w.push_back(std::log(mu + 0.5) - std::log(i + 1.0));
    sum += k.w.back();
  }
  double sq = 0.0;
  for (double& x : k.w) x /= sum, sq += x * x;
  k.mu_eff = 1.0 / sq;
  const double nd = static_cast<double>(n);
  k.c_sigma = (k.mu_eff + 2.0) / (nd + k.mu_eff + 5.0);
  k.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((k.mu_eff - 1.0) / (nd + 1.0)) - 1.0) + k.c_sigma;
  k.c_mu = std::min(1.0, 2.0 * (k.mu_eff - 2.0 + 1.0 / k.mu_eff) / ((nd + 2.0) * (nd + 2.0) + k.mu_eff));
  k.chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));
  return k;
}

}  // namespace detail

/// p samples from N(mean, step^2 C) in scaled coordinates, each projected.
inline std::vector<AttackParams> propose(const SearchState& s, const FeasibleSet& fs, const ChannelParams& c,
                                         const DecoyConfig& d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.covariance);
  const Eigen::MatrixXd A = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  CounterRng rng(derive_key(s.seed, static_cast<std::uint64_t>(s.generation)));
  std::vector<AttackParams> out;
  out.reserve(static_cast<std::size_t>(s.population));
  Eigen::VectorXd z(s.mean.size());
  for (int k = 0; k < s.population; ++k) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd x = s.mean + s.step_size * s.scale.cwiseProduct(A * z);
    out.push_back(project(attack_from_vector(s.family, detail::to_std(x)), fs, c, d));
  }
  return out;
}

struct Evaluated {
  AttackParams candidate;
  double loss;
};

/// Moves the search toward larger losses.
inline SearchState update(const SearchState& s, const std::vector<Evaluated>& evaluated, const FeasibleSet& fs,
                          const ChannelParams& c, const DecoyConfig& d) {
  const auto expected = propose(s, fs, c, d);
  if (evaluated.size() != expected.size()) throw std::invalid_argument("update: candidate count mismatch");
  for (std::size_t k = 0; k < expected.size(); ++k)
    if (!(evaluated[k].candidate == expected[k])) throw std::invalid_argument("update: candidates not from propose");
  for (const auto& e : evaluated)
    if (std::isnan(e.loss)) throw std::invalid_argument("update: NaN loss");

  SearchState n = s;
  const std::size_t dim = s.dim();
  const auto k = detail::es_constants(s.population, dim);

  std::vector<std::size_t> order(evaluated.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Descending loss; index breaks ties so the ranking is reproducible.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return evaluated[a].loss > evaluated[b].loss; });
  if (evaluated[order[0]].loss > n.best_loss) {
    n.best_loss = evaluated[order[0]].loss;
    n.best = evaluated[order[0]].candidate;
  }

  // Steps of the projected candidates in scaled coordinates.
  auto scaled_step = [&](const AttackParams& a) {
    const auto v = attack_vector(a);
    Eigen::VectorXd y(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      const double den = s.step_size * s.scale[static_cast<Eigen::Index>(i)];
      y[static_cast<Eigen::Index>(i)] = den > 0.0 ? (v[i] - s.mean[static_cast<Eigen::Index>(i)]) / den : 0.0;
    }
    return y;
  };
  Eigen::VectorXd yw = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < k.w.size(); ++i) {
    const Eigen::VectorXd y = scaled_step(evaluated[order[i]].candidate);
    yw += k.w[i] * y;
    rank_mu.noalias() += k.w[i] * y * y.transpose();
  }
  n.mean = s.mean + s.step_size * s.scale.cwiseProduct(yw);
  const auto box = family_box(s.family, fs);
  for (std::size_t i = 0; i < dim; ++i)
    n.mean[static_cast<Eigen::Index>(i)] = std::clamp(n.mean[static_cast<Eigen::Index>(i)], box[i].first, box[i].second);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.covariance);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-20);
  const Eigen::MatrixXd inv_sqrt = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
                                   es.eigenvectors().transpose();
  n.path = (1.0 - k.c_sigma) * s.path + std::sqrt(k.c_sigma * (2.0 - k.c_sigma) * k.mu_eff) * (inv_sqrt * yw);
  n.covariance = (1.0 - k.c_mu) * s.covariance + k.c_mu * rank_mu;
  n.covariance = 0.5 * (n.covariance + n.covariance.transpose()).eval();
  n.covariance += 1e-12 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  n.step_size = s.step_size * std::exp((k.c_sigma / k.d_sigma) * (n.path.norm() / k.chi_n - 1.0));
  n.step_size = std::clamp(n.step_size, 1e-8, 2.0);
  n.generation = s.generation + 1;
  return n;
}

inline double budgeted_loss(double raw_loss, const AttackParams& a, double lambda_cost, const FeasibleSet& fs) {
  if (lambda_cost < 0.0) throw std::invalid_argument("budgeted_loss: negative lambda_cost");
  if (lambda_cost == 0.0) return raw_loss;
  return raw_loss - lambda_cost * attack_cost(a, fs);
}

struct SearchLogRow {
  Family family;
  int generation;
  AttackParams best;
  double best_loss;
};

/// T generations of propose / evaluate / update. loss(candidate, generation, index).
inline SearchState run_search(SearchState s, int generations, const FeasibleSet& fs, const ChannelParams& c,
                              const DecoyConfig& d,
                              const std::function<std::vector<double>(const std::vector<AttackParams>&, int)>& loss,
                              std::vector<SearchLogRow>* log = nullptr) {
  for (int g = 0; g < generations; ++g) {
    const auto cand = propose(s, fs, c, d);
    const auto losses = loss(cand, s.generation);
    if (losses.size() != cand.size()) throw std::runtime_error("run_search: loss count mismatch");
    std::vector<Evaluated> ev;
    for (std::size_t k = 0; k < cand.size(); ++k) ev.push_back({cand[k], losses[k]});
    s = update(s, ev, fs, c, d);
    if (log) log->push_back({s.family, s.generation, s.best, s.best_loss});
  }
  return s;
}

// --- family mixture --------------------------------------------------------

struct FamilyMixture {
  std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25};  // order of kAttackFamilies
  double temperature = 1.0;
  double budget = 0.25;  // max total variation from uniform

  double tv_from_uniform() const {
    double s = 0.0;
    for (double w : weights) s += std::abs(w - 0.25);
    return 0.5 * s;
  }

  /// Inverse-CDF draw from a uniform variate.
  Family draw(double u) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return kAttackFamilies[i];
    }
    return kAttackFamilies.back();
  }
};

/// Exponential reweighting, then radial retraction toward uniform onto the
/// TV ball. The retraction keeps the simplex and lands on the boundary exactly.
inline FamilyMixture dro_reweight(const FamilyMixture& m, const std::array<double, 4>& losses, double eta_dro) {
  for (double l : losses)
    if (!std::isfinite(l)) throw std::invalid_argument("dro_reweight: non-finite loss");
  if (eta_dro == 0.0) return m;
  FamilyMixture out = m;
  const double lmax = *std::max_element(losses.begin(), losses.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    out.weights[i] = m.weights[i] * std::exp(eta_dro / m.temperature * (losses[i] - lmax));
    sum += out.weights[i];
  }
  for (double& w : out.weights) w /= sum;
  const double tv = out.tv_from_uniform();
  if (tv > out.budget) {
    const double t = out.budget / tv;
    for (double& w : out.weights) w = 0.25 + t * (w - 0.25);
  }
  return out;
}

}  // namespace qkdids
