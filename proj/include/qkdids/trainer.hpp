#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkdids/adversary.hpp"
#include "qkdids/defender.hpp"
#include "qkdids/metrics.hpp"
#include "qkdids/simulator.hpp"
#include "qkdids/telemetry.hpp"

namespace qkdids {

struct TrainConfig {
  int rounds = 6;
  int generations = 40;
  int population = 16;
  int blocks_per_candidate = 4;
  double far_target = 0.01;
  LossWeights weights;
  int window = 8;
  std::uint64_t seed = 1;
  std::uint64_t block_pulses = 50000;
  int honest_blocks = 2000;
  int seeded_attack_blocks = 400;
  int hard_negatives_per_round = 300;
  int pool_cap = 2000;
  int honest_pool_cap = 6000;  // honest training windows kept across rounds
  int miss_eval_blocks = 400;  // fresh blocks of the worst attack for the history miss rate
  int episode_len = 8;
  std::vector<Family> families{kAttackFamilies.begin(), kAttackFamilies.end()};
  bool attacks_enabled = true;
  bool dro_enabled = true;
  double eta_dro = 1.0;
  double dro_budget = 0.25;
  double lambda_cost = 0.0;
  int epochs = 12;
  int batch = 64;
  double learning_rate = 3e-3;
  int hidden = 32;
  double oc_shrinkage = 0.1;
  bool randomize = true;

  void validate() const {
    if (rounds < 1) throw std::invalid_argument("TrainConfig: rounds < 1");
    if (!(far_target > 0.0 && far_target <= 0.05)) throw std::invalid_argument("TrainConfig: far_target outside (0, 0.05]");
    weights.validate();
    if (window < 1) throw std::invalid_argument("TrainConfig: window < 1");
    if (population < 4) throw std::invalid_argument("TrainConfig: population < 4");
    if (generations < 1 || blocks_per_candidate < 1) throw std::invalid_argument("TrainConfig: empty search budget");
    if (block_pulses == 0) throw std::invalid_argument("TrainConfig: block_pulses = 0");
    if (honest_blocks < 50) throw std::invalid_argument("TrainConfig: need at least 50 honest blocks");
    if (pool_cap < 0 || hard_negatives_per_round < 0 || seeded_attack_blocks < 0 || miss_eval_blocks < 0 ||
        honest_pool_cap < 0)
      throw std::invalid_argument("TrainConfig: negative count");
    if (episode_len < 1 || epochs < 0 || batch < 1 || hidden < 1) throw std::invalid_argument("TrainConfig: bad shape");
    if (lambda_cost < 0.0 || eta_dro < 0.0 || dro_budget < 0.0) throw std::invalid_argument("TrainConfig: negative rate");
    for (Family f : families)
      if (f == Family::Null) throw std::invalid_argument("TrainConfig: null family listed as an attack");
  }
  bool operator==(const TrainConfig&) const = default;
};

/// A labeled window of raw (unnormalized) features, oldest first.
struct ExampleWindow {
  std::vector<FeatureVector> raw;
  int label = 0;
  double gap = 0.0;
  Family family = Family::Null;
};

struct FamilyOutcome {
  Family family;
  AttackParams best;
  double loss;
};

struct RoundHistory {
  int round = 0;
  Family worst_family = Family::Null;
  AttackParams worst = NullAttack{};
  double worst_loss = 0.0;
  double miss_rate = 0.0;  // current defender on fresh blocks under the worst attack
  double lambda_mix = 1.0;
  double tau = 0.0;
  double val_auc = 0.5;
  double r0_ref = 0.0;
  std::size_t pool_size = 0;
  std::array<double, 4> mixture{0.25, 0.25, 0.25, 0.25};
  std::vector<FamilyOutcome> families;
};

struct TrainResult {
  DefenderModel model;
  std::vector<RoundHistory> history;
  std::vector<SearchLogRow> search_log;
  FamilyMixture mixture;
};

// --- helpers -----------------------------------------------------------------

inline std::uint64_t seed_path(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t k = seed;
  for (auto t : tags) k = derive_key(k, t);
  return k;
}

inline std::vector<FeatureVector> normalize_window(const Normalizer& nz, const std::vector<FeatureVector>& raw) {
  std::vector<FeatureVector> out;
  out.reserve(raw.size());
  for (const auto& x : raw) out.push_back(defender_input(nz, x));
  return out;
}

/// Windows ending at each index of [lo, hi), never reaching before lo.
inline std::vector<ExampleWindow> stream_windows(const std::vector<FeatureVector>& raw, std::size_t lo, std::size_t hi,
                                                 int w) {
  std::vector<ExampleWindow> out;
  for (std::size_t t = lo; t < hi; ++t) {
    const std::size_t start = t + 1 >= lo + static_cast<std::size_t>(w) ? t + 1 - w : lo;
    out.push_back({{raw.begin() + static_cast<std::ptrdiff_t>(start), raw.begin() + static_cast<std::ptrdiff_t>(t + 1)},
                   0, 0.0, Family::Null});
  }
  return out;
}

/// Attack episode preceded by honest context: the window of episode block j
/// holds the last (w - 1 - j) context blocks and episode blocks 0..j. Honest
/// tail blocks after the episode give honest-labeled windows that still
/// reach back into the attack.
inline std::vector<ExampleWindow> episode_windows(const std::vector<FeatureVector>& context,
                                                  const std::vector<BlockRecord>& episode, double r0_ref, int w,
                                                  const std::vector<FeatureVector>& tail = {}) {
  std::vector<FeatureVector> seq = context;
  for (const auto& b : episode) seq.push_back(extract_features(b));
  seq.insert(seq.end(), tail.begin(), tail.end());
  std::vector<ExampleWindow> out;
  for (std::size_t j = 0; j < episode.size() + tail.size(); ++j) {
    const std::size_t end = context.size() + j + 1;
    const std::size_t start = end > static_cast<std::size_t>(w) ? end - w : 0;
    ExampleWindow ex;
    ex.raw.assign(seq.begin() + static_cast<std::ptrdiff_t>(start), seq.begin() + static_cast<std::ptrdiff_t>(end));
    if (j < episode.size()) {
      ex.label = episode[j].truth.attacked() ? 1 : 0;
      ex.gap = std::min(r0_ref, episode[j].truth.leak);
      ex.family = family_of(episode[j].truth.attack);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

/// w-1 consecutive raw honest features starting at a seeded position.
inline std::vector<FeatureVector> pick_context(const std::vector<FeatureVector>& honest, int w, std::uint64_t key) {
  const std::size_t need = static_cast<std::size_t>(std::max(0, w - 1));
  if (need == 0) return {};
  if (honest.size() < need) throw std::invalid_argument("pick_context: honest pool shorter than the window");
  CounterRng rng(key);
  const std::size_t s = rng.below(honest.size() - need + 1);
  return {honest.begin() + static_cast<std::ptrdiff_t>(s), honest.begin() + static_cast<std::ptrdiff_t>(s + need)};
}

/// Uniform draw from the family's feasible box, projected.
inline AttackParams random_feasible(Family f, const FeasibleSet& fs, const ChannelParams& c, const DecoyConfig& d,
                                    CounterRng& rng) {
  std::vector<double> v;
  for (const auto& [lo, hi] : family_box(f, fs)) v.push_back(rng.uniform(lo, hi));
  return project(attack_from_vector(f, v), fs, c, d);
}

inline double pooled_honest_rate(const std::vector<BlockRecord>& honest, const DecoyConfig& d, const EpsilonBudget& eps) {
  CellTable t;
  for (const auto& b : honest) t += b.counts;
  return secret_fraction(t, d, eps).r;
}

struct RoundScores {
  std::vector<double> oc, temporal;
};

inline RoundScores component_scores(const DefenderModel& m, const std::vector<ExampleWindow>& set) {
  RoundScores s;
  s.oc.resize(set.size());
  s.temporal.resize(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    const auto w = normalize_window(m.normalizer, set[i].raw);
    s.oc[i] = oc_rescale(m.oc.score(w.back()));
    s.temporal[i] = m.temporal.score(w);
  });
  return s;
}

inline std::vector<double> mix(const RoundScores& s, double lambda) {
  std::vector<double> out(s.oc.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mixed_score(lambda, s.oc[i], s.temporal[i]);
  return out;
}

inline double window_score(const DefenderModel& m, const ExampleWindow& ex) {
  return m.mixed_score(normalize_window(m.normalizer, ex.raw));
}

/// Mean-per-block operational loss of a candidate attack against a frozen
/// defender, over a short episode starting after honest context.
inline double candidate_loss(const DefenderModel& m, const AttackParams& a, const ChannelParams& c,
                             const DecoyConfig& d, const FeasibleSet& fs, const std::vector<FeatureVector>& context,
                             int blocks, std::uint64_t N, std::uint64_t key, double r0_ref, const LossWeights& lw,
                             bool randomize) {
  const std::vector<AttackParams> sched(static_cast<std::size_t>(blocks), a);
  const auto ep = simulate_stream(c, d, sched, N, key, fs, {randomize, 1});
  const auto wins = episode_windows(context, ep, r0_ref, m.window);
  double loss = 0.0;
  for (const auto& ex : wins) {
    const bool alarm = decide(window_score(m, ex), m.tau);
    const double r_a = std::max(0.0, r0_ref - ex.gap);
    loss += operational_loss(false, alarm, r0_ref, r_a, lw);
  }
  return loss / static_cast<double>(wins.size());
}

// --- defender fit ----------------------------------------------------------------

/// AUC averaged over the attack families present, so one family that
/// dominates the pool does not decide the mix alone.
inline double macro_auc(const std::vector<double>& honest, const std::vector<double>& attacked,
                        const std::vector<ExampleWindow>& windows) {
  double sum = 0.0;
  int fams = 0;
  for (Family f : kAttackFamilies) {
    std::vector<double> a;
    for (std::size_t i = 0; i < windows.size(); ++i)
      if (windows[i].label && windows[i].family == f) a.push_back(attacked[i]);
    if (a.empty()) continue;
    sum += auc(honest, a);
    ++fams;
  }
  return fams ? sum / fams : 0.5;
}

struct FitData {
  std::vector<FeatureVector> honest_train_raw;
  std::vector<ExampleWindow> honest_train, honest_val, honest_cal;
  std::vector<ExampleWindow> honest_extra;  // earlier rounds, recurrent scorer only
  std::vector<ExampleWindow> attacked_train, attacked_val;
};

inline void train_temporal(DefenderModel& m, const FitData& data, const TrainConfig& cfg, std::uint64_t key) {
  std::vector<LabeledWindow> ex;
  for (const auto& w : data.honest_train) ex.push_back({normalize_window(m.normalizer, w.raw), 0, 0.0});
  for (const auto& w : data.honest_extra) ex.push_back({normalize_window(m.normalizer, w.raw), 0, 0.0});
  std::size_t attacked = 0;
  for (const auto& w : data.attacked_train) ex.push_back({normalize_window(m.normalizer, w.raw), w.label, w.gap}), attacked += w.label;
  if (attacked == 0 || cfg.epochs == 0) return;
  Adam opt;
  opt.lr = cfg.learning_rate;
  std::vector<std::size_t> idx(ex.size());
  for (int e = 0; e < cfg.epochs; ++e) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    CounterRng rng(derive_key(key, static_cast<std::uint64_t>(e)));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(cfg.batch)) {
      std::vector<LabeledWindow> batch;
      for (std::size_t i = b; i < std::min(idx.size(), b + cfg.batch); ++i) batch.push_back(ex[idx[i]]);
      opt.step(m.temporal, batch, cfg.weights);
    }
  }
}

/// Normalizer + one-class on honest training blocks, recurrent scorer on
/// the combined set, lambda by validation AUC, tau on the calibration split.
inline double fit_defender(DefenderModel& m, const FitData& data, const TrainConfig& cfg, std::uint64_t key) {
  m.window = cfg.window;
  m.normalizer = fit_normalizer(data.honest_train_raw);
  std::vector<FeatureVector> z;
  for (const auto& x : data.honest_train_raw) z.push_back(defender_input(m.normalizer, x));
  m.oc = oc_fit(z, cfg.oc_shrinkage);
  train_temporal(m, data, cfg, key);

  double val_auc = 0.5;
  m.lambda_mix = 1.0;
  std::size_t n_att = 0;
  for (const auto& w : data.attacked_val) n_att += w.label;
  if (n_att > 0) {
    const RoundScores h = component_scores(m, data.honest_val), a = component_scores(m, data.attacked_val);
    double best = -1.0;
    for (int k = 10; k >= 0; --k) {  // ties keep the larger lambda
      const double lam = k / 10.0;
      const double v = macro_auc(mix(h, lam), mix(a, lam), data.attacked_val);
      if (v > best) best = v, m.lambda_mix = lam;
    }
    val_auc = best;
  }
  const RoundScores cal = component_scores(m, data.honest_cal);
  const auto cal_mixed = mix(cal, m.lambda_mix);
  m.tau = calibrate_threshold(cal_mixed, cfg.far_target);
  try {
    m.cusum = cusum_fit_shift(cal_mixed);
  } catch (const std::invalid_argument&) {
    m.cusum.reset();  // degenerate calibration scores
  }
  return val_auc;
}

// --- minimax loop ------------------------------------------------------------

namespace tags {
inline constexpr std::uint64_t kHonest = 0x686f6e657374ULL, kSeeded = 0x736565646564ULL, kSearch = 0x736561726368ULL,
                               kFresh = 0x6672657368ULL, kContext = 0x63747874ULL, kTrain = 0x747261696eULL,
                               kInit = 0x696e6974ULL, kTail = 0x7461696cULL, kMiss = 0x6d697373ULL;
}

inline TrainResult minimax_train(const ChannelParams& c, const DecoyConfig& d, const EpsilonBudget& eps,
                                 const FeasibleSet& fs, const TrainConfig& cfg,
                                 const std::function<void(const RoundHistory&)>& on_round = {},
                                 std::vector<DefenderModel>* round_models = nullptr) {
  cfg.validate();
  c.validate();
  d.validate();
  eps.validate();
  fs.validate();
  const int w = cfg.window;
  const std::uint64_t N = cfg.block_pulses;
  const bool attacks = cfg.attacks_enabled && !cfg.families.empty();

  TrainResult res;
  res.model.window = w;
  res.model.temporal = Gru::random(seed_path(cfg.seed, {tags::kInit}), cfg.hidden);
  res.mixture.budget = cfg.dro_budget;
  std::deque<ExampleWindow> pool, honest_pool;

  for (int k = 1; k <= cfg.rounds; ++k) {
    const std::uint64_t rk = static_cast<std::uint64_t>(k);
    RoundHistory h;
    h.round = k;

    // (1) honest stream, split 60/20/20 into train / validation / calibration segments
    const std::vector<AttackParams> honest_sched(static_cast<std::size_t>(cfg.honest_blocks), NullAttack{});
    const auto honest = simulate_stream(c, d, honest_sched, N, seed_path(cfg.seed, {rk, tags::kHonest}), fs,
                                        {cfg.randomize, thread_count()});
    std::vector<FeatureVector> raw(honest.size());
    parallel_for(honest.size(), [&](std::size_t i) { raw[i] = extract_features(honest[i]); });
    const std::size_t n = raw.size(), a = n * 6 / 10, b = n * 8 / 10;
    const double r0_ref = pooled_honest_rate(honest, d, eps);
    h.r0_ref = r0_ref;

    FitData data;
    data.honest_train_raw.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(a));
    data.honest_train = stream_windows(raw, 0, a, w);
    data.honest_val = stream_windows(raw, a, b, w);
    data.honest_cal = stream_windows(raw, b, n, w);
    data.honest_extra.assign(honest_pool.begin(), honest_pool.end());

    if (attacks) {
      // seeded attacks drawn across each family's box
      const int episodes = (cfg.seeded_attack_blocks + cfg.episode_len - 1) / cfg.episode_len;
      std::vector<std::vector<ExampleWindow>> seeded(static_cast<std::size_t>(episodes));
      parallel_for(seeded.size(), [&](std::size_t e) {
        const Family f = cfg.families[e % cfg.families.size()];
        CounterRng rng(seed_path(cfg.seed, {rk, tags::kSeeded, e}));
        const AttackParams at = random_feasible(f, fs, c, d, rng);
        const std::vector<AttackParams> sched(static_cast<std::size_t>(cfg.episode_len), at);
        const auto ep = simulate_stream(c, d, sched, N, seed_path(cfg.seed, {rk, tags::kSeeded, e, 1}), fs,
                                        {cfg.randomize, 1});
        seeded[e] = episode_windows(pick_context(data.honest_train_raw, w, seed_path(cfg.seed, {rk, tags::kContext, e})),
                                    ep, r0_ref, w,
                                    pick_context(data.honest_train_raw, w, seed_path(cfg.seed, {rk, tags::kTail, e})));
      });
      for (std::size_t e = 0; e < seeded.size(); ++e)
        for (auto& ex : seeded[e]) (e % 5 == 4 ? data.attacked_val : data.attacked_train).push_back(std::move(ex));
      for (std::size_t i = 0; i < pool.size(); ++i) (i % 5 == 4 ? data.attacked_val : data.attacked_train).push_back(pool[i]);
    }

    // (2)-(3) defender
    h.val_auc = fit_defender(res.model, data, cfg, seed_path(cfg.seed, {rk, tags::kTrain}));
    h.lambda_mix = res.model.lambda_mix;
    h.tau = res.model.tau;

    if (attacks) {
      // (4) inner maximization per family against the frozen defender
      const DefenderModel& frozen = res.model;
      std::array<double, 4> fam_loss{};
      for (std::size_t fi = 0; fi < cfg.families.size(); ++fi) {
        const Family f = cfg.families[fi];
        const auto fk = static_cast<std::uint64_t>(f);
        SearchState s = search_init(f, fs, cfg.population, seed_path(cfg.seed, {rk, tags::kSearch, fk}));
        auto loss_fn = [&](const std::vector<AttackParams>& cand, int gen) {
          std::vector<double> out(cand.size());
          parallel_for(cand.size(), [&](std::size_t j) {
            const auto g = static_cast<std::uint64_t>(gen);
            const auto key = seed_path(cfg.seed, {rk, tags::kSearch, fk, g, j});
            const auto ctx = pick_context(data.honest_train_raw, w, derive_key(key, tags::kContext));
            const double l = candidate_loss(frozen, cand[j], c, d, fs, ctx, cfg.blocks_per_candidate, N, key, r0_ref,
                                            cfg.weights, cfg.randomize);
            out[j] = budgeted_loss(l, cand[j], cfg.lambda_cost, fs);
          });
          return out;
        };
        std::vector<SearchLogRow> log;
        s = run_search(s, cfg.generations, fs, c, d, loss_fn, &log);
        res.search_log.insert(res.search_log.end(), log.begin(), log.end());
        h.families.push_back({f, s.best, s.best_loss});
        fam_loss[static_cast<std::size_t>(f) - 1] = s.best_loss;
      }
      const auto worst = std::max_element(h.families.begin(), h.families.end(),
                                          [](const FamilyOutcome& x, const FamilyOutcome& y) { return x.loss < y.loss; });
      h.worst_family = worst->family;
      h.worst = worst->best;
      h.worst_loss = worst->loss;
      if (cfg.dro_enabled) res.mixture = dro_reweight(res.mixture, fam_loss, cfg.eta_dro);
      h.mixture = res.mixture.weights;

      // (5) fresh hard negatives; with DRO the budget is split by mixture weight
      std::vector<std::pair<AttackParams, int>> alloc;
      if (cfg.dro_enabled) {
        int given = 0;
        for (const auto& fo : h.families) {
          const int cnt = static_cast<int>(std::floor(cfg.hard_negatives_per_round *
                                                      res.mixture.weights[static_cast<std::size_t>(fo.family) - 1]));
          alloc.push_back({fo.best, cnt});
          given += cnt;
        }
        alloc[static_cast<std::size_t>(worst - h.families.begin())].second += cfg.hard_negatives_per_round - given;
      } else {
        alloc.push_back({h.worst, cfg.hard_negatives_per_round});
      }
      std::vector<std::tuple<AttackParams, int, std::size_t>> jobs;  // attack, length, tag
      for (std::size_t ai = 0; ai < alloc.size(); ++ai)
        for (int left = alloc[ai].second, e = 0; left > 0; left -= cfg.episode_len, ++e)
          jobs.emplace_back(alloc[ai].first, std::min(left, cfg.episode_len), ai * 100000 + static_cast<std::size_t>(e));
      std::vector<std::vector<ExampleWindow>> fresh(jobs.size());
      parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& [at, len, tag] = jobs[j];
        const std::vector<AttackParams> sched(static_cast<std::size_t>(len), at);
        const auto ep = simulate_stream(c, d, sched, N, seed_path(cfg.seed, {rk, tags::kFresh, tag}), fs,
                                        {cfg.randomize, 1});
        fresh[j] = episode_windows(pick_context(data.honest_train_raw, w, seed_path(cfg.seed, {rk, tags::kFresh, tag, 7})),
                                   ep, r0_ref, w,
                                   pick_context(data.honest_train_raw, w, seed_path(cfg.seed, {rk, tags::kFresh, tag, 8})));
      });
      for (auto& f : fresh)
        for (auto& ex : f) pool.push_back(std::move(ex));
      while (pool.size() > static_cast<std::size_t>(cfg.pool_cap)) pool.pop_front();

      // miss rate of this round's defender on its own worst-case attack
      const int miss_eps = (cfg.miss_eval_blocks + cfg.episode_len - 1) / cfg.episode_len;
      std::vector<std::pair<int, int>> missed(static_cast<std::size_t>(miss_eps));
      parallel_for(missed.size(), [&](std::size_t e) {
        const int len = std::min(cfg.episode_len, cfg.miss_eval_blocks - static_cast<int>(e) * cfg.episode_len);
        const std::vector<AttackParams> sched(static_cast<std::size_t>(len), h.worst);
        const auto ep = simulate_stream(c, d, sched, N, seed_path(cfg.seed, {rk, tags::kMiss, e}), fs,
                                        {cfg.randomize, 1});
        for (const auto& ex : episode_windows(pick_context(data.honest_train_raw, w, seed_path(cfg.seed, {rk, tags::kMiss, e, 7})),
                                              ep, r0_ref, w))
          if (ex.label) ++missed[e].first, missed[e].second += !decide(window_score(res.model, ex), res.model.tau);
      });
      int total = 0, miss = 0;
      for (const auto& [t, m] : missed) total += t, miss += m;
      h.miss_rate = total ? static_cast<double>(miss) / total : 0.0;
    }
    honest_pool.insert(honest_pool.end(), data.honest_train.begin(), data.honest_train.end());
    while (honest_pool.size() + data.honest_train.size() > static_cast<std::size_t>(cfg.honest_pool_cap) &&
           !honest_pool.empty())
      honest_pool.pop_front();
    h.pool_size = pool.size();
    res.history.push_back(h);
    if (round_models) round_models->push_back(res.model);
    if (on_round) on_round(h);
  }
  return res;
}

// --- evaluation sets -------------------------------------------------------------

struct EvalSet {
  std::vector<ExampleWindow> honest, attacked;
};

/// Fresh honest stream windows plus attack episodes (each behind honest context).
inline EvalSet make_eval_set(const ChannelParams& c, const DecoyConfig& d, const EpsilonBudget& eps,
                             const FeasibleSet& fs, const AttackParams& attack, int honest_blocks, int attacked_blocks,
                             int episode_len, int w, std::uint64_t N, std::uint64_t seed, bool randomize = true) {
  EvalSet out;
  const std::vector<AttackParams> hs(static_cast<std::size_t>(honest_blocks), NullAttack{});
  const auto honest = simulate_stream(c, d, hs, N, seed_path(seed, {tags::kHonest}), fs, {randomize, thread_count()});
  std::vector<FeatureVector> raw(honest.size());
  parallel_for(honest.size(), [&](std::size_t i) { raw[i] = extract_features(honest[i]); });
  out.honest = stream_windows(raw, 0, raw.size(), w);
  const double r0 = pooled_honest_rate(honest, d, eps);
  const int episodes = (attacked_blocks + episode_len - 1) / episode_len;
  std::vector<std::vector<ExampleWindow>> eps_w(static_cast<std::size_t>(episodes));
  parallel_for(eps_w.size(), [&](std::size_t e) {
    const int len = std::min(episode_len, attacked_blocks - static_cast<int>(e) * episode_len);
    const std::vector<AttackParams> sched(static_cast<std::size_t>(len), attack);
    const auto ep = simulate_stream(c, d, sched, N, seed_path(seed, {tags::kFresh, e}), fs, {randomize, 1});
    eps_w[e] = episode_windows(pick_context(raw, w, seed_path(seed, {tags::kContext, e})), ep, r0, w);
  });
  for (auto& v : eps_w)
    for (auto& ex : v) out.attacked.push_back(std::move(ex));
  return out;
}

inline std::vector<double> score_windows(const DefenderModel& m, const std::vector<ExampleWindow>& set) {
  std::vector<double> s(set.size());
  parallel_for(set.size(), [&](std::size_t i) { s[i] = window_score(m, set[i]); });
  return s;
}

}  // namespace qkdids
