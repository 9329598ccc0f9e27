#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qkdids/qkdids.hpp"

using namespace qkdids;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSimulateTag = 0x73696d756c617465ULL;
constexpr std::uint64_t kMixedTag = 0x6d69786564ULL;
constexpr std::uint64_t kImportanceTag = 0x696d706f7274ULL;

/// Errors in arguments or config files; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config, out, model, data, family = "null", params, far_grid = "0.001,0.0025,0.005,0.01,0.02,0.05";
  std::optional<std::uint64_t> seed;
  int blocks = 100;
  double far = 0.01;
  double attack_rate = 1.0;
};

ExperimentConfig load_or_default(const Options& o) {
  ExperimentConfig c;
  try {
    if (!o.config.empty()) c = load_config(o.config);
    if (o.seed) c.train.seed = *o.seed;
    c.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return c;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": not a number: '" + item + "'");
    }
  }
  return v;
}

/// Representative point of a family when no parameters are given.
AttackParams default_attack(Family f, const FeasibleSet& f_s) {
  switch (f) {
    case Family::TimeShift: return TimeShift{0.5 * f_s.dt_max};
    case Family::Blinding: return Blinding{0.5 * f_s.I_max, 0.0, f_s.block_span};
    case Family::PNS: return PNS{0.5};
    case Family::Trojan: return Trojan{0.5 * f_s.rho_max, f_s.P_max};
    default: return NullAttack{};
  }
}

std::vector<AttackParams> schedule_for(const Options& o, const ExperimentConfig& cfg, const FeasibleSet& f_s) {
  if (o.blocks < 1) throw UsageError("--blocks must be positive");
  if (!(o.attack_rate >= 0.0 && o.attack_rate <= 1.0)) throw UsageError("--attack-rate outside [0, 1]");
  const bool mixed = o.family == "mixed";
  const auto fam = parse_family(o.family);
  if (!mixed && !fam) throw UsageError("unknown attack family '" + o.family + "'");
  std::optional<AttackParams> fixed;
  if (!mixed) {
    if (*fam == Family::Null) {
      if (!o.params.empty()) throw UsageError("--params given for the honest family");
      fixed = NullAttack{};
    } else if (o.params.empty()) {
      fixed = default_attack(*fam, f_s);
    } else {
      try {
        fixed = attack_from_vector(*fam, parse_list(o.params, "--params"));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      if (!is_feasible(*fixed, f_s, cfg.channel, cfg.decoy)) throw UsageError("--params outside the feasible set");
    }
  }
  // Attacks come in episodes; each episode is attacked with probability attack_rate.
  std::vector<AttackParams> sched(static_cast<std::size_t>(o.blocks), NullAttack{});
  const int len = cfg.train.episode_len;
  for (int e = 0; e * len < o.blocks; ++e) {
    CounterRng rng(seed_path(cfg.train.seed, {kMixedTag, static_cast<std::uint64_t>(e)}));
    const bool hit = o.attack_rate >= 1.0 || rng.uniform() < o.attack_rate;
    AttackParams a = NullAttack{};
    if (mixed) {
      const Family f = kAttackFamilies[rng.below(4)];
      a = random_feasible(f, f_s, cfg.channel, cfg.decoy, rng);
    } else {
      a = *fixed;
    }
    if (!hit) continue;
    for (int t = e * len; t < std::min(o.blocks, (e + 1) * len); ++t) sched[static_cast<std::size_t>(t)] = a;
  }
  return sched;
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig cfg = load_or_default(o);
  const FeasibleSet f_s = cfg.feasible();
  const auto sched = schedule_for(o, cfg, f_s);
  if (o.out.empty()) throw UsageError("--out is required");
  const std::uint64_t base = seed_path(cfg.train.seed, {kSimulateTag});
  const auto blocks = simulate_stream(cfg.channel, cfg.decoy, sched, cfg.train.block_pulses, base, f_s,
                                      {cfg.train.randomize, thread_count()});
  Dataset ds;
  ds.header = dataset_header(cfg, cfg.train.seed, blocks.size(),
                             {{"family", o.family}, {"params", o.params}, {"attack_rate", o.attack_rate}});
  ds.rows.resize(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t t) {
    ds.rows[t].index = t;
    ds.rows[t].seed = base ^ t;
    ds.rows[t].block = blocks[t];
    ds.rows[t].features = extract_features(blocks[t]);
  });
  write_text(o.out, dataset_to_text(ds));
  std::size_t attacked = 0;
  for (const auto& a : sched) attacked += family_of(a) != Family::Null;
  std::printf("wrote %zu blocks (%zu attacked) to %s\n", blocks.size(), attacked, o.out.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = load_or_default(o);
  const fs::path out = o.out.empty() ? fs::path(cfg.out_dir) : fs::path(o.out);
  fs::create_directories(out);
  const std::string digest = config_digest(cfg);
  const auto res = minimax_train(cfg.channel, cfg.decoy, cfg.epsilon, cfg.feasible(), cfg.train,
                                 [](const RoundHistory& h) {
                                   std::printf("round %d: worst=%s loss=%.4f miss=%.4f lambda=%.1f val_auc=%.4f\n",
                                               h.round, std::string(family_name(h.worst_family)).c_str(),
                                               h.worst_loss, h.miss_rate, h.lambda_mix, h.val_auc);
                                   std::fflush(stdout);
                                 });
  save_model(out / "model.json", res.model, digest);
  write_text(out / "history.csv", history_csv(res.history));
  write_text(out / "search_log.csv", search_log_csv(res.search_log));
  json meta{{"format", "qkdids-train"}, {"version", kConfigVersion}, {"config_digest", digest},
            {"config", config_to_json(cfg)}};
  write_text(out / "run.json", meta.dump(1) + "\n");
  const auto& last = res.history.back();
  std::printf("final: rounds=%zu tau=%.6f lambda=%.1f miss=%.4f r0_ref=%.6g model=%s\n", res.history.size(), last.tau,
              last.lambda_mix, last.miss_rate, last.r0_ref, (out / "model.json").string().c_str());
  return 0;
}

DefenderModel load_model_or_usage(const std::string& p) {
  if (p.empty()) throw UsageError("--model is required");
  try {
    return load_model(p);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
}

Dataset load_dataset_or_usage(const std::string& p) {
  if (p.empty()) throw UsageError("--data is required");
  try {
    return load_dataset(p);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
}

std::vector<FeatureVector> raw_features(const Dataset& ds) {
  std::vector<FeatureVector> raw;
  for (const auto& r : ds.rows) raw.push_back(r.features);
  return raw;
}

int cmd_calibrate(const Options& o) {
  DefenderModel m = load_model_or_usage(o.model);
  const Dataset ds = load_dataset_or_usage(o.data);
  if (!(o.far > 0.0 && o.far <= 0.05)) throw UsageError("--far outside (0, 0.05]");
  for (const auto& r : ds.rows)
    if (r.block.truth.attacked()) throw UsageError("calibrate: dataset contains attacked blocks");
  if (ds.rows.empty()) throw std::runtime_error("calibrate: empty dataset");
  const auto wins = stream_windows(raw_features(ds), 0, ds.rows.size(), m.window);
  const auto scores = score_windows(m, wins);
  m.tau = calibrate_threshold(scores, o.far);
  try {
    m.cusum = cusum_fit_shift(scores);
  } catch (const std::invalid_argument&) {
    m.cusum.reset();
  }
  ++m.revision;
  std::string digest;
  load_model(o.model, &digest);
  const std::string out = o.out.empty() ? o.model : o.out;
  save_model(out, m, digest);
  std::printf("tau=%.17g far=%g n=%zu revision=%d\n", m.tau, o.far, scores.size(), m.revision);
  return 0;
}

/// Row-aligned window scores over the dataset stream.
struct Scored {
  std::vector<ExampleWindow> windows;
  std::vector<double> scores;
  std::vector<double> honest;
};

int cmd_evaluate(const Options& o) {
  const DefenderModel m = load_model_or_usage(o.model);
  const Dataset ds = load_dataset_or_usage(o.data);
  const auto grid = parse_list(o.far_grid, "--far-grid");
  for (double f : grid)
    if (!(f > 0.0 && f < 1.0)) throw UsageError("--far-grid values must lie in (0, 1)");
  if (o.out.empty()) throw UsageError("--out is required");
  if (ds.rows.empty()) throw std::runtime_error("evaluate: empty dataset");
  const fs::path out(o.out);
  fs::create_directories(out);

  Scored s;
  s.windows = stream_windows(raw_features(ds), 0, ds.rows.size(), m.window);
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& t = ds.rows[i].block.truth;
    s.windows[i].label = t.attacked() ? 1 : 0;
    s.windows[i].family = family_of(t.attack);
  }
  s.scores = score_windows(m, s.windows);
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    if (!s.windows[i].label) s.honest.push_back(s.scores[i]);

  std::vector<Family> present;
  for (Family f : kAttackFamilies)
    for (const auto& w : s.windows)
      if (w.family == f) {
        present.push_back(f);
        break;
      }
  auto attacked_of = [&](std::optional<Family> f) {
    std::vector<double> a;
    for (std::size_t i = 0; i < s.scores.size(); ++i)
      if (s.windows[i].label && (!f || s.windows[i].family == *f)) a.push_back(s.scores[i]);
    return a;
  };

  std::string roc = "family,threshold,fpr,tpr\n", miss = "family,n_attacked,auc,far,tau,miss\n";
  if (!s.honest.empty()) {
    std::vector<std::pair<std::string, std::optional<Family>>> groups;
    for (Family f : present) groups.emplace_back(std::string(family_name(f)), f);
    if (!present.empty()) groups.emplace_back("all", std::nullopt);
    for (const auto& [name, f] : groups) {
      const auto a = attacked_of(f);
      for (const auto& p : roc_curve(s.honest, a))
        roc += name + "," + csv_num(p.threshold) + "," + csv_num(p.fpr) + "," + csv_num(p.tpr) + "\n";
      const double area = auc(s.honest, a);
      for (double far : grid)
        miss += name + "," + std::to_string(a.size()) + "," + csv_num(area) + "," + csv_num(far) + "," +
                csv_num(calibrate_threshold(s.honest, far)) + "," + csv_num(miss_at_far(s.honest, a, far)) + "\n";
      const auto mm = std::count_if(a.begin(), a.end(), [&](double v) { return !decide(v, m.tau); });
      miss += name + "," + std::to_string(a.size()) + "," + csv_num(area) + ",model," + csv_num(m.tau) + "," +
              csv_num(static_cast<double>(mm) / a.size()) + "\n";
    }
  }
  write_text(out / "roc.csv", roc);
  write_text(out / "miss_at_far.csv", miss);

  // Retention: thresholds from this dataset's honest windows, plus the model's own tau.
  std::string ret = "far,tau,retained_with,retained_without,discard_rate,r0\n";
  if (!s.honest.empty()) {
    auto row = [&](const std::string& label, double tau) {
      std::vector<StreamBlock> stream;
      for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const auto& b = ds.rows[i].block;
        stream.push_back({b.counts, b.N, b.truth.attacked(), b.truth.leak, decide(s.scores[i], tau)});
      }
      const auto d = ds.rows.front().block.truth.decoy;
      try {
        const Retention r = pooled_retained_fraction(stream, d, EpsilonBudget{});
        ret += label + "," + csv_num(tau) + "," + csv_num(r.with_detector) + "," + csv_num(r.without_detector) + "," +
               csv_num(r.discard_rate) + "," + csv_num(r.r0) + "\n";
      } catch (const std::invalid_argument& e) {
        ret += label + "," + csv_num(tau) + ",,,," + "\n";
      }
    };
    for (double far : grid) row(csv_num(far), calibrate_threshold(s.honest, far));
    row("model", m.tau);
  }
  write_text(out / "retention.csv", ret);

  // Latency: one trial per contiguous attacked run, chart restarted after each alarm.
  std::string lat = "detector,episodes,detected,censored,mean_delay,honest_alarms,honest_blocks\n";
  auto latency_row = [&](const std::string& name, const std::vector<bool>& alarms) {
    std::vector<std::vector<bool>> trials;
    std::vector<std::size_t> onsets;
    std::size_t h_alarm = 0, h_n = 0;
    for (std::size_t i = 0; i < alarms.size();) {
      if (!s.windows[i].label) {
        h_alarm += alarms[i], ++h_n, ++i;
        continue;
      }
      std::size_t j = i;
      while (j < alarms.size() && s.windows[j].label) ++j;
      trials.emplace_back(alarms.begin() + static_cast<std::ptrdiff_t>(i), alarms.begin() + static_cast<std::ptrdiff_t>(j));
      onsets.push_back(0);
      i = j;
    }
    const LatencyReport r = detection_latency(trials, onsets);
    lat += name + "," + std::to_string(trials.size()) + "," + std::to_string(r.detected) + "," +
           std::to_string(r.censored) + "," + (r.detected ? csv_num(r.mean_delay) : std::string("nan")) + "," +
           std::to_string(h_alarm) + "," + std::to_string(h_n) + "\n";
  };
  std::vector<bool> thr(s.scores.size());
  for (std::size_t i = 0; i < thr.size(); ++i) thr[i] = decide(s.scores[i], m.tau);
  latency_row("threshold", thr);
  if (m.cusum) latency_row("cusum", cusum_alarms(*m.cusum, s.scores));
  write_text(out / "latency.csv", lat);

  std::string imp = "feature_index,feature,importance\n";
  if (!s.honest.empty() && !present.empty()) {
    std::vector<EvalWindow> ev;
    for (const auto& w : s.windows) ev.push_back({normalize_window(m.normalizer, w.raw), w.label});
    const auto v = permutation_importance(m, ev, seed_path(ds.header.value("seed", 0ULL), {kImportanceTag}));
    for (int j = 0; j < kFeatures; ++j)
      imp += std::to_string(j) + "," + feature_names()[static_cast<std::size_t>(j)] + "," + csv_num(v[j]) + "\n";
  }
  write_text(out / "importance.csv", imp);

  std::printf("evaluated %zu windows (%zu honest); reports in %s\n", s.scores.size(), s.honest.size(), o.out.c_str());
  return 0;
}

int cmd_attack_search(const Options& o) {
  const ExperimentConfig cfg = load_or_default(o);
  const DefenderModel m = load_model_or_usage(o.model);
  const auto fam = parse_family(o.family);
  if (!fam || *fam == Family::Null) throw UsageError("--family must name an attack family");
  if (o.out.empty()) throw UsageError("--out is required");
  const FeasibleSet f_s = cfg.feasible();
  const TrainConfig& t = cfg.train;
  const int w = m.window;

  // Honest reference stream for the context windows and r0.
  const std::vector<AttackParams> hs(static_cast<std::size_t>(t.honest_blocks), NullAttack{});
  const auto honest = simulate_stream(cfg.channel, cfg.decoy, hs, t.block_pulses, seed_path(t.seed, {tags::kHonest}),
                                      f_s, {t.randomize, thread_count()});
  std::vector<FeatureVector> raw(honest.size());
  parallel_for(honest.size(), [&](std::size_t i) { raw[i] = extract_features(honest[i]); });
  const double r0_ref = pooled_honest_rate(honest, cfg.decoy, cfg.epsilon);

  const auto fk = static_cast<std::uint64_t>(*fam);
  SearchState s = search_init(*fam, f_s, t.population, seed_path(t.seed, {tags::kSearch, fk}));
  auto loss_fn = [&](const std::vector<AttackParams>& cand, int gen) {
    std::vector<double> out(cand.size());
    parallel_for(cand.size(), [&](std::size_t j) {
      const auto key = seed_path(t.seed, {tags::kSearch, fk, static_cast<std::uint64_t>(gen), j});
      const auto ctx = pick_context(raw, w, derive_key(key, tags::kContext));
      const double l = candidate_loss(m, cand[j], cfg.channel, cfg.decoy, f_s, ctx, t.blocks_per_candidate,
                                      t.block_pulses, key, r0_ref, t.weights, t.randomize);
      out[j] = budgeted_loss(l, cand[j], t.lambda_cost, f_s);
    });
    return out;
  };
  std::vector<SearchLogRow> log;
  s = run_search(s, t.generations, f_s, cfg.channel, cfg.decoy, loss_fn, &log);

  const fs::path out(o.out);
  fs::create_directories(out);
  write_text(out / "search_log.csv", search_log_csv(log));
  json best{{"format", "qkdids-attack"},
            {"version", kConfigVersion},
            {"config_digest", config_digest(cfg)},
            {"best", attack_to_json(s.best)},
            {"best_loss", s.best_loss},
            {"generations", s.generation},
            {"r0_ref", r0_ref}};
  write_text(out / "best_attack.json", best.dump(1) + "\n");
  std::printf("best %s loss=%.6f\n", attack_to_json(s.best).dump().c_str(), s.best_loss);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoy-state BB84 intrusion-detection simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Overrides train.seed"); };
  auto* sim = app.add_subcommand("simulate", "Simulate a labeled block stream");
  sim->add_option("--config", o.config)->check(CLI::ExistingFile);
  add_seed(sim);
  sim->add_option("--blocks", o.blocks);
  sim->add_option("--family", o.family, "null, timeshift, blinding, pns, trojan or mixed");
  sim->add_option("--params", o.params, "Comma-separated attack parameters");
  sim->add_option("--attack-rate", o.attack_rate, "Probability that an episode is attacked");
  sim->add_option("--out", o.out)->required();

  auto* train = app.add_subcommand("train", "Minimax training");
  train->add_option("--config", o.config)->check(CLI::ExistingFile);
  add_seed(train);
  train->add_option("--out", o.out, "Output directory");

  auto* cal = app.add_subcommand("calibrate", "Recalibrate the threshold on honest data");
  cal->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  cal->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  cal->add_option("--far", o.far);
  cal->add_option("--out", o.out, "Defaults to overwriting --model");

  auto* ev = app.add_subcommand("evaluate", "Metric reports on a labeled dataset");
  ev->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", o.data)->required()->check(CLI::ExistingFile);
  ev->add_option("--far-grid", o.far_grid);
  ev->add_option("--out", o.out)->required();

  auto* as = app.add_subcommand("attack-search", "Search one family against a frozen model");
  as->add_option("--config", o.config)->check(CLI::ExistingFile);
  as->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
  as->add_option("--family", o.family)->required();
  add_seed(as);
  as->add_option("--out", o.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (train->parsed()) return cmd_train(o);
    if (cal->parsed()) return cmd_calibrate(o);
    if (ev->parsed()) return cmd_evaluate(o);
    if (as->parsed()) return cmd_attack_search(o);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
