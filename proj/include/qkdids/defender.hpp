#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "qkdids/rng.hpp"
#include "qkdids/telemetry.hpp"

namespace qkdids {

using Vec16 = Eigen::Matrix<double, kFeatures, 1>;
using Mat16 = Eigen::Matrix<double, kFeatures, kFeatures>;

inline Vec16 to_vec(const FeatureVector& x) { return Eigen::Map<const Vec16>(x.data()); }

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

// --- one-class scorer ---------------------------------------------------------

struct OneClass {
  Vec16 mean = Vec16::Zero();
  Mat16 precision = Mat16::Identity();

  double score(const FeatureVector& x) const {
    const Vec16 d = to_vec(x) - mean;
    return d.dot(precision * d);
  }
};

/// Sample mean and shrunk covariance, (1-s) S + s (tr S / d) I. Samples are
/// sorted first so the floating-point sums do not depend on input order.
inline OneClass oc_fit(std::vector<FeatureVector> xs, double shrinkage = 0.1) {
  if (xs.size() < 10u * kFeatures) throw std::invalid_argument("oc_fit: need at least 10*d samples");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw std::invalid_argument("oc_fit: shrinkage outside (0,1]");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  OneClass oc;
  oc.mean.setZero();
  for (const auto& x : xs) oc.mean += to_vec(x);
  oc.mean /= n;
  Mat16 S = Mat16::Zero();
  for (const auto& x : xs) {
    const Vec16 d = to_vec(x) - oc.mean;
    S.noalias() += d * d.transpose();
  }
  S /= n;
  const double scale = std::max(S.trace() / kFeatures, 1e-12);
  const Mat16 C = (1.0 - shrinkage) * S + shrinkage * scale * Mat16::Identity();
  Eigen::LLT<Mat16> llt(C);
  if (llt.info() != Eigen::Success) throw std::runtime_error("oc_fit: covariance not positive definite");
  oc.precision = llt.solve(Mat16::Identity());
  oc.precision = 0.5 * (oc.precision + oc.precision.transpose()).eval();
  return oc;
}

inline double oc_rescale(double s) { return 1.0 - std::exp(-s / kFeatures); }

/// Normalized inputs are clipped before either scorer sees them. Sparse
/// cells (vacuum gains) put a single dark count hundreds of IQRs out, and a few
/// such honest blocks would otherwise dominate the covariance trace.
inline constexpr double kInputClip = 10.0;

inline FeatureVector defender_input(const Normalizer& nz, const FeatureVector& raw) {
  FeatureVector z = nz.apply(raw);
  for (double& v : z) v = std::clamp(v, -kInputClip, kInputClip);
  return z;
}

// --- gated recurrent scorer ------------------------------------------------------

/// Single-layer GRU over a window of normalized feature vectors followed by
/// an affine read-out and a sigmoid. Parameters live in one flat vector.
struct Gru {
  static constexpr int D = kFeatures;
  int H = 32;
  std::vector<double> theta;

  // Offsets of each block inside theta.
  std::size_t oWz() const { return 0; }
  std::size_t oWr() const { return oWz() + H * D; }
  std::size_t oWn() const { return oWr() + H * D; }
  std::size_t oUz() const { return oWn() + H * D; }
  std::size_t oUr() const { return oUz() + H * H; }
  std::size_t oUn() const { return oUr() + H * H; }
  std::size_t obz() const { return oUn() + H * H; }
  std::size_t obr() const { return obz() + H; }
  std::size_t obn() const { return obr() + H; }
  std::size_t owo() const { return obn() + H; }
  std::size_t obo() const { return owo() + H; }
  std::size_t size() const { return obo() + 1; }

  static Gru zeros(int hidden = 32) {
    Gru g;
    g.H = hidden;
    g.theta.assign(g.size(), 0.0);
    return g;
  }

  static Gru random(std::uint64_t seed, int hidden = 32) {
    Gru g = zeros(hidden);
    CounterRng rng(derive_key(seed, 0x677275ULL));
    const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& v : g.theta) v = rng.uniform(-a, a);
    return g;
  }

  using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VecMap = Eigen::Map<const Eigen::VectorXd>;
  MatMap mat(std::size_t off, int rows, int cols) const { return MatMap(theta.data() + off, rows, cols); }
  VecMap vec(std::size_t off, int n) const { return VecMap(theta.data() + off, n); }

  struct Step {
    Eigen::VectorXd x, h_prev, z, r, n;
  };
  struct Trace {
    std::vector<Step> steps;
    Eigen::VectorXd h;
    double logit = 0.0;
  };

  Trace forward(const std::vector<FeatureVector>& window) const {
    Trace tr;
    tr.h = Eigen::VectorXd::Zero(H);
    tr.steps.reserve(window.size());
    const auto Wz = mat(oWz(), H, D), Wr = mat(oWr(), H, D), Wn = mat(oWn(), H, D);
    const auto Uz = mat(oUz(), H, H), Ur = mat(oUr(), H, H), Un = mat(oUn(), H, H);
    const auto bz = vec(obz(), H), br = vec(obr(), H), bn = vec(obn(), H);
    for (const auto& f : window) {
      Step s;
      s.x = Eigen::Map<const Eigen::VectorXd>(f.data(), D);
      s.h_prev = tr.h;
      s.z = (Wz * s.x + Uz * s.h_prev + bz).unaryExpr([](double a) { return sigmoid(a); });
      s.r = (Wr * s.x + Ur * s.h_prev + br).unaryExpr([](double a) { return sigmoid(a); });
      s.n = (Wn * s.x + Un * s.r.cwiseProduct(s.h_prev) + bn).array().tanh().matrix();
      tr.h = (1.0 - s.z.array()).matrix().cwiseProduct(s.h_prev) + s.z.cwiseProduct(s.n);
      tr.steps.push_back(std::move(s));
    }
    tr.logit = vec(owo(), H).dot(tr.h) + theta[obo()];
    return tr;
  }

  double score(const std::vector<FeatureVector>& window) const { return sigmoid(forward(window).logit); }

  /// Accumulates d(logit)/d(theta) * dlogit into grad.
  void backward(const Trace& tr, double dlogit, std::vector<double>& grad) const {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MutMat = Eigen::Map<RowMat>;
    using MutVec = Eigen::Map<Eigen::VectorXd>;
    auto gm = [&](std::size_t off, int rows, int cols) { return MutMat(grad.data() + off, rows, cols); };
    auto gv = [&](std::size_t off, int n) { return MutVec(grad.data() + off, n); };

    gv(owo(), H) += dlogit * tr.h;
    grad[obo()] += dlogit;
    Eigen::VectorXd dh = dlogit * vec(owo(), H);

    const auto Uz = mat(oUz(), H, H), Ur = mat(oUr(), H, H), Un = mat(oUn(), H, H);
    for (std::size_t t = tr.steps.size(); t-- > 0;) {
      const Step& s = tr.steps[t];
      const Eigen::VectorXd dn = dh.cwiseProduct(s.z);
      const Eigen::VectorXd dz = dh.cwiseProduct(s.n - s.h_prev);
      Eigen::VectorXd dh_prev = dh.cwiseProduct((1.0 - s.z.array()).matrix());

      const Eigen::VectorXd dan = dn.cwiseProduct((1.0 - s.n.array().square()).matrix());
      const Eigen::VectorXd rh = s.r.cwiseProduct(s.h_prev);
      gm(oWn(), H, D).noalias() += dan * s.x.transpose();
      gm(oUn(), H, H).noalias() += dan * rh.transpose();
      gv(obn(), H) += dan;
      const Eigen::VectorXd drh = Un.transpose() * dan;
      const Eigen::VectorXd dr = drh.cwiseProduct(s.h_prev);
      dh_prev += drh.cwiseProduct(s.r);

      const Eigen::VectorXd daz = dz.cwiseProduct(s.z.cwiseProduct((1.0 - s.z.array()).matrix()));
      gm(oWz(), H, D).noalias() += daz * s.x.transpose();
      gm(oUz(), H, H).noalias() += daz * s.h_prev.transpose();
      gv(obz(), H) += daz;
      dh_prev.noalias() += Uz.transpose() * daz;

      const Eigen::VectorXd dar = dr.cwiseProduct(s.r.cwiseProduct((1.0 - s.r.array()).matrix()));
      gm(oWr(), H, D).noalias() += dar * s.x.transpose();
      gm(oUr(), H, H).noalias() += dar * s.h_prev.transpose();
      gv(obr(), H) += dar;
      dh_prev.noalias() += Ur.transpose() * dar;

      dh = std::move(dh_prev);
    }
  }

  /// d(score)/d(theta).
  std::vector<double> score_gradient(const std::vector<FeatureVector>& window) const {
    const Trace tr = forward(window);
    const double p = sigmoid(tr.logit);
    std::vector<double> g(size(), 0.0);
    backward(tr, p * (1.0 - p), g);
    return g;
  }

  bool operator==(const Gru&) const = default;
};

/// One training example: up to w feature vectors (oldest first; absent
/// leading steps are simply not present, which is the masked padding).
struct LabeledWindow {
  std::vector<FeatureVector> steps;
  int label = 0;     // 0 honest, 1 attacked
  double gap = 0.0;  // (r0 - r_a)+ for attacked examples
};

inline double example_weight(const LabeledWindow& ex, const LossWeights& w) {
  return ex.label ? w.alpha + w.gamma * std::max(0.0, ex.gap) : w.beta;
}

/// Weighted logistic loss (batch mean) and its gradient.
inline double temporal_loss_grad(const Gru& g, const std::vector<LabeledWindow>& batch, const LossWeights& w,
                                 std::vector<double>& grad) {
  if (batch.empty()) throw std::invalid_argument("temporal_loss_grad: empty batch");
  grad.assign(g.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    if (ex.label != 0 && ex.label != 1) throw std::invalid_argument("temporal_loss_grad: label not in {0,1}");
    const double wt = example_weight(ex, w);
    if (wt == 0.0) continue;
    const auto tr = g.forward(ex.steps);
    const double l = tr.logit;
    // -log sigmoid(l) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l)
    const double sp = ex.label ? std::log1p(std::exp(-std::abs(l))) + std::max(0.0, -l)
                               : std::log1p(std::exp(-std::abs(l))) + std::max(0.0, l);
    loss += wt * sp * inv;
    g.backward(tr, wt * (sigmoid(l) - ex.label) * inv, grad);
  }
  return loss;
}

/// Plain gradient-descent step. Returns the batch loss before the update.
inline double temporal_train_step(Gru& g, const std::vector<LabeledWindow>& batch, double lr, const LossWeights& w) {
  std::vector<double> grad;
  const double loss = temporal_loss_grad(g, batch, w, grad);
  if (!std::isfinite(loss)) throw std::runtime_error("temporal_train_step: non-finite loss");
  for (std::size_t i = 0; i < grad.size(); ++i) g.theta[i] -= lr * grad[i];
  return loss;
}

/// Adam on the flat parameter vector; used by the trainer for faster fits.
struct Adam {
  double lr = 3e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  double step(Gru& g, const std::vector<LabeledWindow>& batch, const LossWeights& w) {
    std::vector<double> grad;
    const double loss = temporal_loss_grad(g, batch, w, grad);
    if (!std::isfinite(loss)) throw std::runtime_error("Adam::step: non-finite loss");
    if (m.empty()) m.assign(g.size(), 0.0), v.assign(g.size(), 0.0);
    ++t;
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * grad[i];
      v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
      g.theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
    return loss;
  }
};

// --- CUSUM ------------------------------------------------------------------

struct CusumState {
  double mu0 = 0.0, sigma0 = 1.0, mu1 = 1.0, sigma1 = 1.0;
  double S = 0.0;
  double h_cusum = 1.0;
  // Optional honest quantile table. When set, scores are mapped to normal
  // scores through the honest empirical CDF before the Gaussian ratio.
  std::vector<double> reference;
  std::size_t reference_n = 0;

  double transform(double s) const {
    if (reference.empty()) return s;
    const auto& q = reference;
    const double M = static_cast<double>(q.size() - 1);
    const auto j = static_cast<double>(std::lower_bound(q.begin(), q.end(), s) - q.begin());
    const auto k = static_cast<double>(std::upper_bound(q.begin(), q.end(), s) - q.begin());
    double u;
    if (k > j) {
      u = 0.5 * (j + k - 1.0) / M;
    } else if (k == 0.0) {
      u = 0.0;
    } else if (k > M) {
      u = 1.0;
    } else {
      const auto i = static_cast<std::size_t>(k);
      u = (k - 1.0 + (s - q[i - 1]) / (q[i] - q[i - 1])) / M;
    }
    const double edge = 0.5 / static_cast<double>(std::max<std::size_t>(reference_n, 2));
    u = std::clamp(u, edge, 1.0 - edge);
    return boost::math::quantile(boost::math::normal_distribution<double>(), u);
  }

  double llr(double s) const {
    const double x = transform(s);
    const double z0 = (x - mu0) / sigma0, z1 = (x - mu1) / sigma1;
    return std::log(sigma0 / sigma1) + 0.5 * (z0 * z0 - z1 * z1);
  }
  bool operator==(const CusumState&) const = default;
};

/// At most `points` evenly spaced quantiles of the sample.
inline std::vector<double> quantile_table(std::vector<double> v, std::size_t points = 1001) {
  if (v.size() < 2 || points < 2) throw std::invalid_argument("quantile_table: need two values and two points");
  std::sort(v.begin(), v.end());
  if (v.size() <= points) return v;
  std::vector<double> q(points);
  for (std::size_t i = 0; i < points; ++i) q[i] = sorted_quantile(v, static_cast<double>(i) / (points - 1));
  return q;
}

// --- full model -------------------------------------------------------------

inline constexpr const char* kModelVersion = "qkdids-model/1";

struct DefenderModel {
  Normalizer normalizer;
  OneClass oc;
  Gru temporal = Gru::zeros();
  double lambda_mix = 1.0;
  double tau = 1.0;
  int window = 8;
  int revision = 0;  // bumped by recalibration
  std::string version = kModelVersion;
  std::optional<CusumState> cusum;

  /// window: normalized features, oldest first; the last entry is the block being scored.
  double mixed_score(const std::vector<FeatureVector>& window_steps) const {
    if (window_steps.empty()) throw std::invalid_argument("mixed_score: empty window");
    const double oc_part = oc_rescale(oc.score(window_steps.back()));
    if (lambda_mix >= 1.0) return oc_part;
    return lambda_mix * oc_part + (1.0 - lambda_mix) * temporal.score(window_steps);
  }
};

inline double mixed_score(double lambda, double oc_rescaled, double temporal) {
  return lambda * oc_rescaled + (1.0 - lambda) * temporal;
}

// --- thresholding ----------------------------------------------------------------

/// Smallest observed score whose right tail holds at most floor(far * n)
/// scores; when even the maximum has too many ties, the next representable
/// value above it.
inline double calibrate_threshold(std::vector<double> scores, double far) {
  if (scores.empty()) throw std::invalid_argument("calibrate_threshold: empty score set");
  if (!(far >= 0.0 && far <= 1.0)) throw std::invalid_argument("calibrate_threshold: far outside [0,1]");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("calibrate_threshold: non-finite score");
  std::sort(scores.begin(), scores.end());
  const auto n = scores.size();
  const auto allowed = static_cast<std::size_t>(std::floor(far * static_cast<double>(n) + 1e-9));
  // scores[i] has n - i scores >= it once i is the first index of its value.
  std::size_t i = n - std::min(allowed, n);
  while (i > 0 && i < n && scores[i - 1] == scores[i]) ++i;  // step past ties
  if (i >= n) return std::nextafter(scores.back(), std::numeric_limits<double>::infinity());
  return scores[i];
}

inline bool decide(double s, double tau) {
  if (!std::isfinite(s)) throw std::invalid_argument("decide: non-finite score");
  return s >= tau;
}

/// S' = max(0, S + L); alarm iff S' >= h.
inline bool cusum_accumulate(CusumState& st, double L) {
  st.S = std::max(0.0, st.S + L);
  return st.S >= st.h_cusum;
}

inline bool cusum_step(CusumState& st, double s) { return cusum_accumulate(st, st.llr(s)); }

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  // Shifted by the first value so a constant sample gives its value exactly.
  double acc = 0.0;
  for (double x : v) acc += x - v.front();
  const double m = v.front() + acc / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

struct CusumCalibration {
  double target_arl0 = 500.0;
  int runs = 1000;
  std::uint64_t seed = 0xc05;
};

/// Monte Carlo ARL0 for threshold h: runs restart from S = 0 and replay
/// honest scores drawn with replacement; censored at 50 * target.
inline double cusum_arl0(const CusumState& st, const std::vector<double>& honest_llr, double h,
                         const CusumCalibration& cal) {
  const auto cap = static_cast<std::uint64_t>(50.0 * cal.target_arl0);
  double total = 0.0;
  for (int r = 0; r < cal.runs; ++r) {
    CounterRng rng(derive_key(cal.seed, static_cast<std::uint64_t>(r)));
    double S = 0.0;
    std::uint64_t t = 0;
    while (t < cap) {
      ++t;
      S = std::max(0.0, S + honest_llr[rng.below(honest_llr.size())]);
      if (S >= h) break;
    }
    total += static_cast<double>(t);
  }
  (void)st;
  return total / cal.runs;
}

inline CusumState cusum_fit(const std::vector<double>& honest, const std::vector<double>& attacked,
                            const CusumCalibration& cal = {}) {
  if (honest.size() < 2 || attacked.size() < 2) throw std::invalid_argument("cusum_fit: need two scores per class");
  CusumState st;
  std::tie(st.mu0, st.sigma0) = mean_sd(honest);
  std::tie(st.mu1, st.sigma1) = mean_sd(attacked);
  if (!(st.sigma0 > 0.0) || !(st.sigma1 > 0.0)) throw std::invalid_argument("cusum_fit: zero-variance score set");
  std::vector<double> L(honest.size());
  for (std::size_t i = 0; i < honest.size(); ++i) L[i] = st.llr(honest[i]);
  // Grow h until the ARL0 target is met, then bisect down to the smallest such h.
  double lo = 0.0, hi = 1.0;
  while (cusum_arl0(st, L, hi, cal) < cal.target_arl0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) break;
  }
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cusum_arl0(st, L, mid, cal) >= cal.target_arl0 ? hi : lo) = mid;
  }
  st.h_cusum = hi;
  st.S = 0.0;
  return st;
}

/// Chart designed for a mean shift of `shift` honest standard deviations,
/// on normal scores of the honest sample: skewed detector scores otherwise
/// put the honest tail in charge of h.
inline CusumState cusum_fit_shift(const std::vector<double>& honest, double shift = 1.0,
                                  const CusumCalibration& cal = {}) {
  if (honest.size() < 2) throw std::invalid_argument("cusum_fit_shift: need two honest scores");
  CusumState ref;
  ref.reference = quantile_table(honest);
  ref.reference_n = honest.size();
  if (ref.reference.front() == ref.reference.back()) throw std::invalid_argument("cusum_fit_shift: constant scores");
  std::vector<double> z(honest.size());
  for (std::size_t i = 0; i < honest.size(); ++i) z[i] = ref.transform(honest[i]);
  const double sd = mean_sd(z).second;
  std::vector<double> moved(z);
  for (double& s : moved) s += shift * sd;
  CusumState st = cusum_fit(z, moved, cal);
  st.reference = std::move(ref.reference);
  st.reference_n = ref.reference_n;
  return st;
}

// --- randomized smoothing -----------------------------------------------------

struct SmoothedScore {
  double s_bar = 0.0;
  bool certified = false;
  double margin = 0.0;  // |s_bar - tau|
  double bound = 0.0;   // 3 * sd / sqrt(n_mc)
};

/// Mean of the mixed score under Gaussian noise on the current feature
/// vector. Certified when the margin to tau beats the Monte Carlo
/// concentration term.
inline SmoothedScore smoothed_score(const DefenderModel& m, const std::vector<FeatureVector>& window_steps,
                                    double sigma_smooth, int n_mc, std::uint64_t seed) {
  if (n_mc < 100) throw std::invalid_argument("smoothed_score: n_mc < 100");
  if (window_steps.empty()) throw std::invalid_argument("smoothed_score: empty window");
  std::vector<double> v(static_cast<std::size_t>(n_mc));
  auto w = window_steps;
  const FeatureVector x = window_steps.back();
  for (int k = 0; k < n_mc; ++k) {
    CounterRng rng(derive_key(seed, static_cast<std::uint64_t>(k)));
    for (int j = 0; j < kFeatures; ++j) w.back()[j] = x[j] + sigma_smooth * rng.normal();
    v[static_cast<std::size_t>(k)] = m.mixed_score(w);
  }
  SmoothedScore out;
  const auto [mean, sd] = mean_sd(v);
  out.s_bar = mean;
  out.margin = std::abs(mean - m.tau);
  out.bound = 3.0 * sd / std::sqrt(static_cast<double>(n_mc));
  out.certified = out.margin > out.bound;
  return out;
}

}  // namespace qkdids
