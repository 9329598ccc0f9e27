#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkdids/trainer.hpp"

namespace qkdids {

using json = nlohmann::json;

inline constexpr int kConfigVersion = 1;
inline constexpr int kDatasetVersion = 1;
inline constexpr int kModelFileVersion = 1;

/// Malformed or inconsistent input files and configs.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- field tables --------------------------------------------------------------
//
// Each struct is read and written through one list of (name, member) pairs so
// the two directions cannot drift apart. Missing keys keep their defaults;
// unknown keys are rejected.

template <typename T>
using DoubleFields = std::vector<std::pair<const char*, double T::*>>;

inline const DoubleFields<ChannelParams>& channel_fields() {
  static const DoubleFields<ChannelParams> f{
      {"L", &ChannelParams::L},           {"alpha", &ChannelParams::alpha},
      {"loss_offset_db", &ChannelParams::loss_offset_db},
      {"p_d", &ChannelParams::p_d},       {"e_d", &ChannelParams::e_d},
      {"sigma_t", &ChannelParams::sigma_t}, {"delta_det", &ChannelParams::delta_det},
      {"sigma_g", &ChannelParams::sigma_g}, {"dt_max", &ChannelParams::dt_max},
      {"I_max", &ChannelParams::I_max},   {"I_th", &ChannelParams::I_th},
      {"P_max", &ChannelParams::P_max},   {"rho_max", &ChannelParams::rho_max},
      {"kappa_tha", &ChannelParams::kappa_tha}, {"sigma_bias", &ChannelParams::sigma_bias},
      {"sigma_pret", &ChannelParams::sigma_pret}, {"sigma_temp", &ChannelParams::sigma_temp}};
  return f;
}

inline const DoubleFields<DecoyConfig>& decoy_fields() {
  static const DoubleFields<DecoyConfig> f{{"mu_s", &DecoyConfig::mu_s}, {"mu_w", &DecoyConfig::mu_w},
                                           {"mu_v", &DecoyConfig::mu_v}, {"p_s", &DecoyConfig::p_s},
                                           {"p_w", &DecoyConfig::p_w},   {"p_v", &DecoyConfig::p_v},
                                           {"p_Z", &DecoyConfig::p_Z}};
  return f;
}

inline const DoubleFields<EpsilonBudget>& epsilon_fields() {
  static const DoubleFields<EpsilonBudget> f{
      {"eps_total", &EpsilonBudget::eps_total}, {"eps_EC", &EpsilonBudget::eps_EC},
      {"eps_PE", &EpsilonBudget::eps_PE},       {"eps_PA", &EpsilonBudget::eps_PA},
      {"eps_EAT", &EpsilonBudget::eps_EAT},     {"eps_decoy", &EpsilonBudget::eps_decoy}};
  return f;
}

template <typename T>
json fields_to_json(const T& v, const DoubleFields<T>& fields) {
  json j = json::object();
  for (const auto& [name, ptr] : fields) j[name] = v.*ptr;
  return j;
}

template <typename T>
void fields_from_json(const json& j, T& v, const DoubleFields<T>& fields, const char* where) {
  if (!j.is_object()) throw FormatError(std::string(where) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const auto& [name, ptr] : fields)
      if (it.key() == name) {
        if (!it->is_number()) throw FormatError(std::string(where) + "." + name + ": expected a number");
        v.*ptr = it->get<double>();
        found = true;
      }
    if (!found) throw FormatError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

// --- attacks -------------------------------------------------------------------

inline const std::vector<const char*>& attack_param_names(Family f) {
  static const std::vector<const char*> none, ts{"dt"}, bl{"I0", "t1", "t2"}, pn{"f_split"}, tr{"rho", "P_ret"};
  switch (f) {
    case Family::TimeShift: return ts;
    case Family::Blinding: return bl;
    case Family::PNS: return pn;
    case Family::Trojan: return tr;
    default: return none;
  }
}

inline json attack_to_json(const AttackParams& a) {
  const Family f = family_of(a);
  json j{{"family", std::string(family_name(f))}};
  const auto v = attack_vector(a);
  const auto& names = attack_param_names(f);
  for (std::size_t i = 0; i < v.size(); ++i) j[names[i]] = v[i];
  return j;
}

inline AttackParams attack_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family")) throw FormatError("attack: missing family");
  const auto f = parse_family(j.at("family").get<std::string>());
  if (!f) throw FormatError("attack: unknown family '" + j.at("family").get<std::string>() + "'");
  const auto& names = attack_param_names(*f);
  std::vector<double> v;
  for (const char* n : names) {
    if (!j.contains(n)) throw FormatError(std::string("attack: missing parameter ") + n);
    v.push_back(j.at(n).get<double>());
  }
  if (j.size() != names.size() + 1) throw FormatError("attack: unexpected parameters");
  return attack_from_vector(*f, v);
}

// --- experiment config -------------------------------------------------------

struct ExperimentConfig {
  ChannelParams channel;
  DecoyConfig decoy;
  EpsilonBudget epsilon;
  KeyParams key;
  TrainConfig train;
  double block_span = 1000.0;
  std::string out_dir = "out";
  int version = kConfigVersion;

  FeasibleSet feasible() const {
    return FeasibleSet::from(channel, epsilon.eps_decoy, block_span, static_cast<double>(train.block_pulses));
  }
  void validate() const {
    if (version != kConfigVersion) throw FormatError("config: unsupported version " + std::to_string(version));
    channel.validate();
    decoy.validate();
    epsilon.validate();
    train.validate();
    feasible().validate();
    if (!(key.f_EC >= 1.0) || !(key.c_EAT > 0.0)) throw std::invalid_argument("config: key parameters out of range");
  }
};

inline json train_to_json(const TrainConfig& t) {
  json fam = json::array();
  for (Family f : t.families) fam.push_back(std::string(family_name(f)));
  return {{"rounds", t.rounds},
          {"generations", t.generations},
          {"population", t.population},
          {"blocks_per_candidate", t.blocks_per_candidate},
          {"far_target", t.far_target},
          {"alpha", t.weights.alpha},
          {"beta", t.weights.beta},
          {"gamma", t.weights.gamma},
          {"window", t.window},
          {"seed", t.seed},
          {"block_pulses", t.block_pulses},
          {"honest_blocks", t.honest_blocks},
          {"seeded_attack_blocks", t.seeded_attack_blocks},
          {"hard_negatives_per_round", t.hard_negatives_per_round},
          {"pool_cap", t.pool_cap},
          {"honest_pool_cap", t.honest_pool_cap},
          {"miss_eval_blocks", t.miss_eval_blocks},
          {"episode_len", t.episode_len},
          {"families", fam},
          {"attacks_enabled", t.attacks_enabled},
          {"dro_enabled", t.dro_enabled},
          {"eta_dro", t.eta_dro},
          {"dro_budget", t.dro_budget},
          {"lambda_cost", t.lambda_cost},
          {"epochs", t.epochs},
          {"batch", t.batch},
          {"learning_rate", t.learning_rate},
          {"hidden", t.hidden},
          {"oc_shrinkage", t.oc_shrinkage},
          {"randomize", t.randomize}};
}

inline TrainConfig train_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("train: expected an object");
  TrainConfig t;
  const json ref = train_to_json(t);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ref.contains(it.key())) throw FormatError("train: unknown key '" + it.key() + "'");
  auto get = [&](const char* k, auto& dst) {
    if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
  };
  get("rounds", t.rounds);
  get("generations", t.generations);
  get("population", t.population);
  get("blocks_per_candidate", t.blocks_per_candidate);
  get("far_target", t.far_target);
  get("alpha", t.weights.alpha);
  get("beta", t.weights.beta);
  get("gamma", t.weights.gamma);
  get("window", t.window);
  get("seed", t.seed);
  get("block_pulses", t.block_pulses);
  get("honest_blocks", t.honest_blocks);
  get("seeded_attack_blocks", t.seeded_attack_blocks);
  get("hard_negatives_per_round", t.hard_negatives_per_round);
  get("pool_cap", t.pool_cap);
  get("honest_pool_cap", t.honest_pool_cap);
  get("miss_eval_blocks", t.miss_eval_blocks);
  get("episode_len", t.episode_len);
  get("attacks_enabled", t.attacks_enabled);
  get("dro_enabled", t.dro_enabled);
  get("eta_dro", t.eta_dro);
  get("dro_budget", t.dro_budget);
  get("lambda_cost", t.lambda_cost);
  get("epochs", t.epochs);
  get("batch", t.batch);
  get("learning_rate", t.learning_rate);
  get("hidden", t.hidden);
  get("oc_shrinkage", t.oc_shrinkage);
  get("randomize", t.randomize);
  if (j.contains("families")) {
    t.families.clear();
    for (const auto& s : j.at("families")) {
      const auto f = parse_family(s.get<std::string>());
      if (!f || *f == Family::Null) throw FormatError("train.families: bad family '" + s.get<std::string>() + "'");
      t.families.push_back(*f);
    }
  }
  return t;
}

inline json config_to_json(const ExperimentConfig& c) {
  return {{"format", "qkdids-config"},
          {"version", c.version},
          {"channel", fields_to_json(c.channel, channel_fields())},
          {"decoy", fields_to_json(c.decoy, decoy_fields())},
          {"epsilon", fields_to_json(c.epsilon, epsilon_fields())},
          {"key", {{"f_EC", c.key.f_EC}, {"c_EAT", c.key.c_EAT}}},
          {"train", train_to_json(c.train)},
          {"feasible", {{"block_span", c.block_span}}},
          {"io", {{"out_dir", c.out_dir}}}};
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("config: expected an object");
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "format") {
      if (*it != "qkdids-config") throw FormatError("config: wrong format tag");
    } else if (k == "version") {
      c.version = it->get<int>();
    } else if (k == "channel") {
      fields_from_json(*it, c.channel, channel_fields(), "channel");
    } else if (k == "decoy") {
      fields_from_json(*it, c.decoy, decoy_fields(), "decoy");
    } else if (k == "epsilon") {
      fields_from_json(*it, c.epsilon, epsilon_fields(), "epsilon");
    } else if (k == "key") {
      for (auto kt = it->begin(); kt != it->end(); ++kt) {
        if (kt.key() == "f_EC") c.key.f_EC = kt->get<double>();
        else if (kt.key() == "c_EAT") c.key.c_EAT = kt->get<double>();
        else throw FormatError("key: unknown key '" + kt.key() + "'");
      }
    } else if (k == "train") {
      c.train = train_from_json(*it);
    } else if (k == "feasible") {
      for (auto kt = it->begin(); kt != it->end(); ++kt) {
        if (kt.key() == "block_span") c.block_span = kt->get<double>();
        else throw FormatError("feasible: unknown key '" + kt.key() + "'");
      }
    } else if (k == "io") {
      for (auto kt = it->begin(); kt != it->end(); ++kt) {
        if (kt.key() == "out_dir") c.out_dir = kt->get<std::string>();
        else throw FormatError("io: unknown key '" + kt.key() + "'");
      }
    } else {
      throw FormatError("config: unknown key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
  try {
    return config_from_json(parse_json(read_text(p), p.string()));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

/// FNV-1a over the canonical (sorted-key, compact) serialization.
inline std::string config_digest(const ExperimentConfig& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// --- dataset -----------------------------------------------------------------

struct DatasetRow {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  BlockRecord block;
  FeatureVector features{};
};

struct Dataset {
  json header;
  std::vector<DatasetRow> rows;
};

inline json block_to_json(const DatasetRow& r) {
  const BlockRecord& b = r.block;
  json counts = json::array();
  for (int i = 0; i < kIntensities; ++i)
    for (int s = 0; s < kBases; ++s) {
      const auto& c = b.counts.at(i, s);
      counts.push_back({c.emitted, c.sifted, c.detected, c.errors});
    }
  json feats = json::array();
  for (double v : r.features) feats.push_back(v);
  return {{"index", r.index},
          {"seed", r.seed},
          {"N", b.N},
          {"counts", counts},
          {"det0", b.det0},
          {"det1", b.det1},
          {"double_clicks", b.double_clicks},
          {"timing_hist", b.timing_hist},
          {"proxy", {b.proxy_bias, b.proxy_temp, b.proxy_Pret}},
          {"label", b.truth.attacked() ? 1 : 0},
          {"truth",
           {{"attack", attack_to_json(b.truth.attack)},
            {"leak", b.truth.leak},
            {"channel", fields_to_json(b.truth.channel, channel_fields())},
            {"decoy", fields_to_json(b.truth.decoy, decoy_fields())}}},
          {"features", feats}};
}

inline DatasetRow block_from_json(const json& j) {
  DatasetRow r;
  BlockRecord& b = r.block;
  r.index = j.at("index").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  b.N = j.at("N").get<std::uint64_t>();
  const auto& counts = j.at("counts");
  if (counts.size() != static_cast<std::size_t>(kIntensities * kBases)) throw FormatError("row: counts shape");
  for (int i = 0; i < kIntensities; ++i)
    for (int s = 0; s < kBases; ++s) {
      const auto& c = counts.at(static_cast<std::size_t>(i * kBases + s));
      b.counts.at(i, s) = {c.at(0).get<std::uint64_t>(), c.at(1).get<std::uint64_t>(), c.at(2).get<std::uint64_t>(),
                           c.at(3).get<std::uint64_t>()};
    }
  b.det0 = j.at("det0").get<std::uint64_t>();
  b.det1 = j.at("det1").get<std::uint64_t>();
  b.double_clicks = j.at("double_clicks").get<std::uint64_t>();
  b.timing_hist = j.at("timing_hist").get<std::array<std::uint64_t, kTimingBins>>();
  const auto& p = j.at("proxy");
  b.proxy_bias = p.at(0).get<double>();
  b.proxy_temp = p.at(1).get<double>();
  b.proxy_Pret = p.at(2).get<double>();
  if (!j.contains("truth") || !j.contains("label")) throw FormatError("row: unlabeled block");
  const auto& t = j.at("truth");
  b.truth.attack = attack_from_json(t.at("attack"));
  b.truth.leak = t.at("leak").get<double>();
  fields_from_json(t.at("channel"), b.truth.channel, channel_fields(), "truth.channel");
  fields_from_json(t.at("decoy"), b.truth.decoy, decoy_fields(), "truth.decoy");
  if (j.at("label").get<int>() != (b.truth.attacked() ? 1 : 0)) throw FormatError("row: label disagrees with truth");
  r.features = j.at("features").get<FeatureVector>();
  return r;
}

inline json dataset_header(const ExperimentConfig& c, std::uint64_t seed, std::size_t blocks, const json& attack_spec) {
  return {{"format", "qkdids-dataset"},
          {"version", kDatasetVersion},
          {"config_digest", config_digest(c)},
          {"seed", seed},
          {"blocks", blocks},
          {"attack", attack_spec}};
}

inline std::string dataset_to_text(const Dataset& d) {
  std::string out = d.header.dump() + "\n";
  for (const auto& r : d.rows) out += block_to_json(r).dump() + "\n";
  return out;
}

inline Dataset dataset_from_text(const std::string& text, const std::string& what = "dataset") {
  Dataset d;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_json(line, what + ":" + std::to_string(lineno));
    try {
      if (d.header.is_null()) {
        if (j.value("format", "") != "qkdids-dataset") throw FormatError(what + ": missing dataset header");
        if (j.value("version", 0) != kDatasetVersion) throw FormatError(what + ": unsupported dataset version");
        d.header = std::move(j);
      } else {
        d.rows.push_back(block_from_json(j));
      }
    } catch (const json::exception& e) {
      throw FormatError(what + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (d.header.is_null()) throw FormatError(what + ": empty file");
  return d;
}

inline Dataset load_dataset(const std::filesystem::path& p) { return dataset_from_text(read_text(p), p.string()); }

// --- model ---------------------------------------------------------------------

inline json matrix_json(const double* data, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return {{"shape", shape}, {"data", std::vector<double>(data, data + n)}};
}

inline std::vector<double> matrix_from_json(const json& j, const std::vector<std::size_t>& shape, const char* what) {
  if (j.at("shape").get<std::vector<std::size_t>>() != shape) throw FormatError(std::string("model: bad shape for ") + what);
  auto v = j.at("data").get<std::vector<double>>();
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  if (v.size() != n) throw FormatError(std::string("model: bad length for ") + what);
  return v;
}

inline json model_to_json(const DefenderModel& m, const std::string& digest) {
  Eigen::Matrix<double, kFeatures, kFeatures, Eigen::RowMajor> prec = m.oc.precision;
  json j{{"format", m.version},
         {"file_version", kModelFileVersion},
         {"config_digest", digest},
         {"revision", m.revision},
         {"window", m.window},
         {"lambda_mix", m.lambda_mix},
         {"tau", m.tau},
         {"normalizer",
          {{"location", matrix_json(m.normalizer.location.data(), {kFeatures})},
           {"scale", matrix_json(m.normalizer.scale.data(), {kFeatures})}}},
         {"oc_mean", matrix_json(m.oc.mean.data(), {kFeatures})},
         {"oc_precision", matrix_json(prec.data(), {kFeatures, kFeatures})},
         {"temporal",
          {{"hidden", m.temporal.H}, {"weights", matrix_json(m.temporal.theta.data(), {m.temporal.theta.size()})}}}};
  if (m.cusum) {
    const auto& c = *m.cusum;
    j["cusum"] = {{"mu0", c.mu0}, {"sigma0", c.sigma0}, {"mu1", c.mu1}, {"sigma1", c.sigma1}, {"h", c.h_cusum},
                  {"reference", c.reference}, {"reference_n", c.reference_n}};
  }
  return j;
}

inline DefenderModel model_from_json(const json& j, std::string* digest = nullptr) {
  if (j.value("format", "") != kModelVersion || j.value("file_version", 0) != kModelFileVersion)
    throw FormatError("model: version mismatch (expected " + std::string(kModelVersion) + ")");
  try {
    DefenderModel m;
    if (digest) *digest = j.value("config_digest", "");
    m.revision = j.at("revision").get<int>();
    m.window = j.at("window").get<int>();
    m.lambda_mix = j.at("lambda_mix").get<double>();
    m.tau = j.at("tau").get<double>();
    const auto loc = matrix_from_json(j.at("normalizer").at("location"), {kFeatures}, "normalizer.location");
    const auto sc = matrix_from_json(j.at("normalizer").at("scale"), {kFeatures}, "normalizer.scale");
    std::copy(loc.begin(), loc.end(), m.normalizer.location.begin());
    std::copy(sc.begin(), sc.end(), m.normalizer.scale.begin());
    const auto mean = matrix_from_json(j.at("oc_mean"), {kFeatures}, "oc_mean");
    const auto prec = matrix_from_json(j.at("oc_precision"), {kFeatures, kFeatures}, "oc_precision");
    m.oc.mean = Eigen::Map<const Vec16>(mean.data());
    m.oc.precision = Eigen::Map<const Eigen::Matrix<double, kFeatures, kFeatures, Eigen::RowMajor>>(prec.data());
    const int H = j.at("temporal").at("hidden").get<int>();
    m.temporal = Gru::zeros(H);
    m.temporal.theta = matrix_from_json(j.at("temporal").at("weights"), {m.temporal.size()}, "temporal.weights");
    if (j.contains("cusum")) {
      const auto& c = j.at("cusum");
      CusumState st;
      st.mu0 = c.at("mu0").get<double>();
      st.sigma0 = c.at("sigma0").get<double>();
      st.mu1 = c.at("mu1").get<double>();
      st.sigma1 = c.at("sigma1").get<double>();
      st.h_cusum = c.at("h").get<double>();
      st.reference = c.value("reference", std::vector<double>{});
      st.reference_n = c.value("reference_n", std::size_t{0});
      if (!std::is_sorted(st.reference.begin(), st.reference.end()) || st.reference.size() == 1)
        throw FormatError("model: cusum reference must be a sorted table");
      m.cusum = st;
    }
    if (!(m.lambda_mix >= 0.0 && m.lambda_mix <= 1.0) || !std::isfinite(m.tau))
      throw FormatError("model: lambda_mix or tau out of range");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& p, const DefenderModel& m, const std::string& digest) {
  write_text(p, model_to_json(m, digest).dump(1) + "\n");
}

inline DefenderModel load_model(const std::filesystem::path& p, std::string* digest = nullptr) {
  return model_from_json(parse_json(read_text(p), p.string()), digest);
}

// --- CSV -----------------------------------------------------------------------

inline std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string vector_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + csv_num(v[i]);
  return s;
}

inline std::string history_csv(const std::vector<RoundHistory>& hist) {
  std::string s = "round,worst_family,worst_params,worst_loss,miss_rate,lambda_mix,tau,val_auc,r0_ref,pool_size,"
                  "w_timeshift,w_blinding,w_pns,w_trojan\n";
  for (const auto& h : hist) {
    s += std::to_string(h.round) + "," + std::string(family_name(h.worst_family)) + "," +
         vector_text(attack_vector(h.worst)) + "," + csv_num(h.worst_loss) + "," + csv_num(h.miss_rate) + "," +
         csv_num(h.lambda_mix) + "," + csv_num(h.tau) + "," + csv_num(h.val_auc) + "," + csv_num(h.r0_ref) + "," +
         std::to_string(h.pool_size);
    for (double w : h.mixture) s += "," + csv_num(w);
    s += "\n";
  }
  return s;
}

inline std::string search_log_csv(const std::vector<SearchLogRow>& log) {
  std::string s = "family,generation,best_params,best_loss\n";
  for (const auto& r : log)
    s += std::string(family_name(r.family)) + "," + std::to_string(r.generation) + "," +
         vector_text(attack_vector(r.best)) + "," + csv_num(r.best_loss) + "\n";
  return s;
}

}  // namespace qkdids
