#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "pidet/corpus.hpp"
#include "pidet/envelope.hpp"

using namespace pidet;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("pidet_test_" + std::to_string(::getpid()) + "_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> tokenized(const Corpus& corpus) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.records.size());
  for (const auto& r : corpus.records) docs.push_back(tokenize(normalize(r.text)));
  return docs;
}

TrainingManifest sample_manifest() {
  TrainingManifest m;
  m.seed = 42;
  m.hyperparams = {{"alpha", 1.0}, {"max_features", 64}};
  m.corpus_fingerprint = "fnv1a64:00000000deadbeef";
  return m;
}

ModelEnvelope nb_envelope(const Corpus& corpus) {
  const auto docs = tokenized(corpus);
  std::vector<bool> y;
  for (const auto& r : corpus.records) y.push_back(r.malicious);
  ModelEnvelope env;
  env.kind = ModelKind::nb;
  env.vocabulary = build_vocabulary(docs, 256);
  env.tfidf = fit_tfidf(docs, 64);
  std::vector<SparseVector> X;
  for (const auto& d : docs) X.push_back(transform_tfidf(*env.tfidf, d));
  env.nb = train_nb(X, y, env.tfidf->feature_count());
  env.manifest = sample_manifest();
  return env;
}

ModelEnvelope rf_envelope(const Corpus& corpus) {
  const auto docs = tokenized(corpus);
  std::vector<bool> y;
  for (const auto& r : corpus.records) y.push_back(r.malicious);
  ModelEnvelope env;
  env.kind = ModelKind::random_forest;
  env.vocabulary = build_vocabulary(docs, 256);
  env.tfidf = fit_tfidf(docs, 64);
  std::vector<SparseVector> X;
  for (const auto& d : docs) X.push_back(transform_tfidf(*env.tfidf, d));
  env.forest = train_random_forest(X, y, env.tfidf->feature_count(), 7, 11);
  env.manifest = sample_manifest();
  return env;
}

ModelEnvelope fnn_envelope(const Corpus& corpus) {
  ModelEnvelope env;
  env.kind = ModelKind::fnn;
  env.vocabulary = build_vocabulary(tokenized(corpus), 256);
  HyperParams hp;
  hp.d_embed = 4;
  hp.fnn_hidden = {5, 4, 3};
  hp.max_len = 12;
  hp.seed = 3;
  env.fnn = init_fnn(env.vocabulary.size(), hp);
  env.manifest = sample_manifest();
  return env;
}

ModelEnvelope lstm_envelope(const Corpus& corpus) {
  ModelEnvelope env;
  env.kind = ModelKind::lstm;
  env.vocabulary = build_vocabulary(tokenized(corpus), 256);
  HyperParams hp;
  hp.d_embed = 4;
  hp.lstm_hidden = 3;
  hp.max_len = 12;
  hp.seed = 4;
  env.lstm = init_lstm(env.vocabulary.size(), hp);
  env.manifest = sample_manifest();
  return env;
}

// A one-feature bayes model: "attack" pushes the posterior to 2/3, any text
// without it scores exactly 0.5 and therefore stays benign.
ModelEnvelope keyword_envelope() {
  ModelEnvelope env;
  env.kind = ModelKind::nb;
  env.vocabulary.max_size = 16;
  env.vocabulary.index_to_token = {"<pad>", "<unk>", "attack"};
  env.vocabulary.token_to_index = {{"attack", 2}};
  TfidfModel t;
  t.features = {"attack"};
  t.feature_index = {{"attack", 0}};
  t.idf = {1.0};
  t.n_documents = 2;
  t.max_features = 16;
  env.tfidf = std::move(t);
  NBModel m;
  m.class_log_prior = {std::log(0.5), std::log(0.5)};
  m.feature_log_likelihood[0] = {std::log(1.0 / 3.0)};
  m.feature_log_likelihood[1] = {std::log(2.0 / 3.0)};
  env.nb = std::move(m);
  env.manifest = sample_manifest();
  return env;
}

void check_round_trip(const ModelEnvelope& env, const Corpus& probes, const std::string& tag) {
  const auto p1 = temp_file(tag + "_a.json");
  const auto p2 = temp_file(tag + "_b.json");
  save_model(env, p1.string());
  const auto loaded = load_model(p1.string());
  CHECK(loaded.kind == env.kind);
  for (const auto& r : probes.records) {
    INFO(tag << ": " << r.text);
    CHECK(loaded.score(r.text) == env.score(r.text));
  }
  save_model(loaded, p2.string());
  CHECK(slurp(p1) == slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

}  // namespace

TEST_CASE("kind_from_string accepts names and the rf shorthand") {
  CHECK(kind_from_string("nb") == ModelKind::nb);
  CHECK(kind_from_string("rf") == ModelKind::random_forest);
  CHECK(kind_from_string("random_forest") == ModelKind::random_forest);
  CHECK(kind_from_string("fnn") == ModelKind::fnn);
  CHECK(kind_from_string("lstm") == ModelKind::lstm);
  CHECK_THROWS_AS(kind_from_string("svm"), std::invalid_argument);
  CHECK(to_string(ModelKind::random_forest) == "random_forest");
}

TEST_CASE("every model kind survives save/load with identical scores") {
  const auto corpus = generate_synthetic_corpus(120, 21);
  const auto probes = generate_synthetic_corpus(60, 99);
  check_round_trip(nb_envelope(corpus), probes, "nb");
  check_round_trip(rf_envelope(corpus), probes, "rf");
  check_round_trip(fnn_envelope(corpus), probes, "fnn");
  check_round_trip(lstm_envelope(corpus), probes, "lstm");
}

TEST_CASE("manifest fields survive the round trip") {
  const auto corpus = generate_synthetic_corpus(40, 5);
  const auto env = nb_envelope(corpus);
  const auto p = temp_file("manifest.json");
  save_model(env, p.string());
  const auto loaded = load_model(p.string());
  CHECK(loaded.manifest.seed == 42);
  CHECK(loaded.manifest.corpus_fingerprint == "fnv1a64:00000000deadbeef");
  CHECK(loaded.manifest.hyperparams["alpha"] == 1.0);
  CHECK(loaded.manifest.hyperparams["max_features"] == 64);
  std::filesystem::remove(p);
}

TEST_CASE("an unsupported schema version is rejected by name") {
  const auto corpus = generate_synthetic_corpus(40, 6);
  auto j = envelope_to_json(nb_envelope(corpus));
  j["schema_version"] = "pi-model/9";
  const auto p = temp_file("badschema.json");
  std::ofstream(p) << j.dump() << "\n";
  CHECK_THROWS_WITH(load_model(p.string()),
                    ContainsSubstring("pi-model/9") && ContainsSubstring("pi-model/1"));
  std::filesystem::remove(p);
}

TEST_CASE("a non-envelope file is rejected naming the expected schema") {
  const auto p = temp_file("garbage.json");
  std::ofstream(p) << "this is not json\n";
  CHECK_THROWS_WITH(load_model(p.string()), ContainsSubstring("pi-model/1"));
  std::filesystem::remove(p);
  CHECK_THROWS_WITH(load_model("/nonexistent/model.json"), ContainsSubstring("cannot open"));
}

TEST_CASE("tampered payload lengths are detected") {
  const auto corpus = generate_synthetic_corpus(40, 7);
  auto j = envelope_to_json(fnn_envelope(corpus));
  j["model"]["embedding"]["data"].erase(0);
  const auto p = temp_file("tampered.json");
  std::ofstream(p) << j.dump() << "\n";
  CHECK_THROWS_WITH(load_model(p.string()), ContainsSubstring("length mismatch"));
  std::filesystem::remove(p);
}

TEST_CASE("a truncated likelihood table is detected") {
  const auto corpus = generate_synthetic_corpus(40, 8);
  auto j = envelope_to_json(nb_envelope(corpus));
  j["model"]["feature_log_likelihood"][1].erase(0);
  const auto p = temp_file("truncated.json");
  std::ofstream(p) << j.dump() << "\n";
  CHECK_THROWS_WITH(load_model(p.string()), ContainsSubstring("length mismatch"));
  std::filesystem::remove(p);
}

TEST_CASE("keyword model classifies through the envelope") {
  const auto env = keyword_envelope();
  CHECK(env.score("Launch the attack now") == Catch::Approx(2.0 / 3.0).margin(1e-12));
  CHECK(env.predict("Launch the attack now"));
  CHECK(env.score("hello world") == 0.5);
  CHECK_FALSE(env.predict("hello world"));  // exact tie stays benign
}

TEST_CASE("a two-tree vote tie stays benign") {
  ModelEnvelope env;
  env.kind = ModelKind::random_forest;
  env.vocabulary.max_size = 4;
  env.vocabulary.index_to_token = {"<pad>", "<unk>"};
  TfidfModel t;
  t.features = {"x"};
  t.feature_index = {{"x", 0}};
  t.idf = {1.0};
  t.n_documents = 1;
  t.max_features = 4;
  env.tfidf = std::move(t);
  ForestModel f;
  f.n_features = 1;
  DecisionTree benign_leaf, malicious_leaf;
  benign_leaf.nodes.push_back({-1, 0.0, -1, -1, {5, 0}});
  malicious_leaf.nodes.push_back({-1, 0.0, -1, -1, {0, 5}});
  f.trees = {benign_leaf, malicious_leaf};
  env.forest = std::move(f);
  env.manifest = sample_manifest();
  CHECK(env.score("anything") == 0.5);
  CHECK_FALSE(env.predict("anything"));
}

TEST_CASE("evaluate_model scores a corpus against the envelope") {
  const auto env = keyword_envelope();
  Corpus corpus;
  for (int i = 0; i < 10; ++i) {
    corpus.records.push_back({"please attack target " + std::to_string(i), true,
                              Source::synthetic});
    corpus.records.push_back({"weather is fine today " + std::to_string(i), false,
                              Source::synthetic});
  }
  const auto res = evaluate_model(env, corpus);
  CHECK(res.cm.tp == 10);
  CHECK(res.cm.tn == 10);
  CHECK(res.cm.fp == 0);
  CHECK(res.cm.fn == 0);
  CHECK(res.report.accuracy == 1.0);

  // Strip the keyword: everything scores 0.5 and is predicted benign.
  Corpus bland;
  for (int i = 0; i < 10; ++i) {
    bland.records.push_back({"sample text " + std::to_string(i), i % 2 == 0,
                             Source::synthetic});
  }
  const auto res2 = evaluate_model(env, bland);
  CHECK(res2.cm.tp == 0);
  CHECK(res2.cm.fp == 0);
  CHECK(res2.report.accuracy == 0.5);
  CHECK(res2.report.degenerate);

  CHECK_THROWS_AS(evaluate_model(env, Corpus{}), std::invalid_argument);
}

TEST_CASE("evaluate_model refuses a bayes envelope without its tfidf table") {
  auto env = keyword_envelope();
  env.tfidf.reset();
  Corpus corpus;
  corpus.records.push_back({"text", false, Source::synthetic});
  CHECK_THROWS_WITH(evaluate_model(env, corpus), ContainsSubstring("tfidf"));
}
