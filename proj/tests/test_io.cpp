#include <gtest/gtest.h>

#include "qkdids/io.hpp"

using namespace qkdids;

TEST(Config, RoundTrip) {
  ExperimentConfig c;
  c.channel.L = 75;
  c.train.rounds = 3;
  c.train.families = {Family::PNS, Family::TimeShift};
  c.block_span = 500;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.channel, c.channel);
  EXPECT_EQ(back.decoy, c.decoy);
  EXPECT_EQ(back.train, c.train);
  EXPECT_EQ(back.block_span, 500);
  EXPECT_EQ(config_digest(back), config_digest(c));
}

TEST(Config, MissingKeysKeepDefaults) {
  const auto c = config_from_json(json::parse(R"({"version":1,"channel":{"L":20}})"));
  EXPECT_EQ(c.channel.L, 20);
  EXPECT_EQ(c.channel.alpha, 0.2);
  EXPECT_EQ(c.train, TrainConfig{});
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_json(json::parse(R"({"chanel":{}})")), FormatError);
  EXPECT_THROW(config_from_json(json::parse(R"({"channel":{"LL":1}})")), FormatError);
  EXPECT_THROW(config_from_json(json::parse(R"({"version":2})")), FormatError);
  EXPECT_THROW(config_from_json(json::parse(R"({"train":{"families":["pns","bogus"]}})")), FormatError);
  EXPECT_THROW(config_from_json(json::parse(R"({"decoy":{"p_s":0.9}})")), std::invalid_argument);
}

TEST(Config, DigestTracksContent) {
  ExperimentConfig a, b;
  b.channel.e_d = 0.02;
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
}

TEST(Attack, JsonRoundTrip) {
  for (const AttackParams& a : std::vector<AttackParams>{NullAttack{}, TimeShift{-12.5}, Blinding{0.4, 10, 900},
                                                          PNS{0.3}, Trojan{0.2, 0.7}})
    EXPECT_EQ(attack_from_json(attack_to_json(a)), a);
  EXPECT_THROW(attack_from_json(json::parse(R"({"family":"timeshift"})")), FormatError);
  EXPECT_THROW(attack_from_json(json::parse(R"({"family":"pns","f_split":0.1,"x":2})")), FormatError);
}

TEST(Dataset, RoundTripExact) {
  ExperimentConfig c;
  const auto fs = c.feasible();
  const auto blocks = simulate_stream(c.channel, c.decoy, {NullAttack{}, TimeShift{60}, Blinding{0.6, 0, 1000}}, 20000,
                                      5, fs);
  Dataset d;
  d.header = dataset_header(c, 5, blocks.size(), json::object());
  for (std::size_t i = 0; i < blocks.size(); ++i) d.rows.push_back({i, 5 ^ i, blocks[i], extract_features(blocks[i])});
  const std::string text = dataset_to_text(d);
  const Dataset back = dataset_from_text(text);
  ASSERT_EQ(back.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.rows[i].features, d.rows[i].features);
    EXPECT_EQ(back.rows[i].block.counts.cell, d.rows[i].block.counts.cell);
    EXPECT_EQ(back.rows[i].block.timing_hist, d.rows[i].block.timing_hist);
    EXPECT_EQ(back.rows[i].block.truth.attack, d.rows[i].block.truth.attack);
    EXPECT_EQ(back.rows[i].block.truth.channel, d.rows[i].block.truth.channel);
    EXPECT_EQ(back.rows[i].block.truth.leak, d.rows[i].block.truth.leak);
  }
  EXPECT_EQ(dataset_to_text(back), text);
}

TEST(Dataset, Rejections) {
  EXPECT_THROW(dataset_from_text(""), FormatError);
  EXPECT_THROW(dataset_from_text("{\"format\":\"other\"}\n"), FormatError);
  EXPECT_THROW(dataset_from_text("{\"format\":\"qkdids-dataset\",\"version\":1}\n{\"index\":0}\n"), FormatError);
  EXPECT_THROW(dataset_from_text("not json\n"), FormatError);
}

TEST(Model, RoundTripScoresBitExact) {
  DefenderModel m;
  CounterRng rng(8);
  std::vector<FeatureVector> xs(400);
  for (auto& x : xs)
    for (auto& v : x) v = rng.normal();
  m.normalizer = fit_normalizer(xs);
  std::vector<FeatureVector> z;
  for (const auto& x : xs) z.push_back(defender_input(m.normalizer, x));
  m.oc = oc_fit(z);
  m.temporal = Gru::random(3, 8);
  m.lambda_mix = 0.3;
  m.tau = 0.77;
  m.window = 4;
  m.revision = 2;
  m.cusum = CusumState{0.1, 0.2, 0.3, 0.4, 0.0, 5.5, {}, 0};

  std::string digest;
  const DefenderModel back = model_from_json(json::parse(model_to_json(m, "abc").dump()), &digest);
  EXPECT_EQ(digest, "abc");
  EXPECT_EQ(back.temporal, m.temporal);
  EXPECT_EQ(back.normalizer, m.normalizer);
  EXPECT_EQ(back.oc.precision, m.oc.precision);
  EXPECT_EQ(back.cusum->h_cusum, 5.5);
  EXPECT_TRUE(back.cusum->reference.empty());
  m.cusum->reference = {-1.0, 0.25, 3.0};
  m.cusum->reference_n = 9;
  EXPECT_EQ(*model_from_json(model_to_json(m, "")).cusum, *m.cusum);
  json bad = model_to_json(m, "");
  bad["cusum"]["reference"] = {2.0, 1.0};
  EXPECT_THROW(model_from_json(bad), FormatError);
  for (std::size_t i = 0; i + 4 <= xs.size(); i += 4) {
    std::vector<FeatureVector> w(xs.begin() + i, xs.begin() + i + 4);
    for (auto& x : w) x = defender_input(m.normalizer, x);
    EXPECT_EQ(back.mixed_score(w), m.mixed_score(w));
  }
}

TEST(Model, VersionMismatchRejected) {
  json j = model_to_json(DefenderModel{}, "");
  j["format"] = "qkdids-model/0";
  EXPECT_THROW(model_from_json(j), FormatError);
  json k = model_to_json(DefenderModel{}, "");
  k["oc_precision"]["shape"] = {16, 15};
  EXPECT_THROW(model_from_json(k), FormatError);
}
