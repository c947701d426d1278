#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pidet/corpus.hpp"
#include "pidet/metrics.hpp"
#include "pidet/naive_bayes.hpp"
#include "pidet/nn.hpp"
#include "pidet/random_forest.hpp"
#include "pidet/text.hpp"
#include "pidet/tfidf.hpp"

namespace pidet {

inline constexpr const char* kModelSchemaVersion = "pi-model/1";

enum class ModelKind { nb, random_forest, fnn, lstm };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::nb: return "nb";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::fnn: return "fnn";
    case ModelKind::lstm: return "lstm";
  }
  return "nb";
}

inline ModelKind kind_from_string(const std::string& s) {
  if (s == "nb") return ModelKind::nb;
  if (s == "rf" || s == "random_forest") return ModelKind::random_forest;
  if (s == "fnn") return ModelKind::fnn;
  if (s == "lstm") return ModelKind::lstm;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

struct TrainingManifest {
  std::uint64_t seed = 0;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::string corpus_fingerprint;
};

// One trained classifier plus everything needed to score raw text with it.
// NB and RF carry a TF-IDF table; the network kinds carry the vocabulary
// used for integer encoding.
struct ModelEnvelope {
  std::string schema_version = kModelSchemaVersion;
  ModelKind kind = ModelKind::nb;
  Vocabulary vocabulary;
  std::optional<TfidfModel> tfidf;
  std::optional<NBModel> nb;
  std::optional<ForestModel> forest;
  std::optional<FnnModel> fnn;
  std::optional<LstmModel> lstm;
  TrainingManifest manifest;

  double score(const std::string& text) const {
    const auto tokens = tokenize(normalize(text));
    switch (kind) {
      case ModelKind::nb:
        return predict_nb(*nb, transform_tfidf(*tfidf, tokens));
      case ModelKind::random_forest:
        return predict_forest(*forest, transform_tfidf(*tfidf, tokens));
      case ModelKind::fnn:
        return fnn_forward(*fnn, encode_sequence(tokens, vocabulary, fnn->max_len));
      case ModelKind::lstm:
        return lstm_forward(*lstm, encode_sequence(tokens, vocabulary, lstm->max_len));
    }
    return 0.0;
  }

  // Strict inequality: a score of exactly 0.5 stays benign.
  bool predict(const std::string& text) const { return score(text) > 0.5; }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.a = j.at("data").get<std::vector<double>>();
  if (m.a.size() != m.rows * m.cols)
    throw std::runtime_error("model envelope: " + what + " payload length mismatch");
  return m;
}

inline void require_size(std::size_t got, std::size_t want, const std::string& what) {
  if (got != want)
    throw std::runtime_error("model envelope: " + what + " payload length mismatch");
}

}  // namespace detail

inline nlohmann::json envelope_to_json(const ModelEnvelope& env) {
  nlohmann::json j;
  j["schema_version"] = env.schema_version;
  j["model_kind"] = to_string(env.kind);
  std::vector<std::string> tokens(env.vocabulary.index_to_token.begin() + 2,
                                  env.vocabulary.index_to_token.end());
  j["vocabulary"] = {{"max_size", env.vocabulary.max_size}, {"tokens", tokens}};
  if (env.tfidf) {
    j["tfidf"] = {{"features", env.tfidf->features},
                  {"idf", env.tfidf->idf},
                  {"n_documents", env.tfidf->n_documents},
                  {"max_features", env.tfidf->max_features}};
  }
  nlohmann::json model;
  if (env.kind == ModelKind::nb) {
    const auto& m = *env.nb;
    model = {{"alpha", m.alpha},
             {"class_log_prior", m.class_log_prior},
             {"feature_log_likelihood",
              {m.feature_log_likelihood[0], m.feature_log_likelihood[1]}}};
  } else if (env.kind == ModelKind::random_forest) {
    const auto& m = *env.forest;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : m.trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : tree.nodes) {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"counts", n.counts}});
      }
      trees.push_back({{"nodes", nodes}});
    }
    model = {{"n_features", m.n_features}, {"seed", m.seed}, {"trees", trees}};
  } else if (env.kind == ModelKind::fnn) {
    const auto& m = *env.fnn;
    nlohmann::json hidden = nlohmann::json::array();
    for (const auto& l : m.hidden)
      hidden.push_back({{"w", detail::matrix_to_json(l.w)}, {"b", l.b}});
    model = {{"vocab_size", m.vocab_size},
             {"d_embed", m.d_embed},
             {"max_len", m.max_len},
             {"embedding", detail::matrix_to_json(m.embedding)},
             {"hidden", hidden},
             {"w_out", m.w_out},
             {"b_out", m.b_out}};
  } else {
    const auto& m = *env.lstm;
    const auto gate = [](const LstmGate& g) {
      return nlohmann::json{{"w", detail::matrix_to_json(g.w)},
                            {"u", detail::matrix_to_json(g.u)},
                            {"b", g.b}};
    };
    model = {{"vocab_size", m.vocab_size},
             {"d_embed", m.d_embed},
             {"hidden_size", m.hidden},
             {"max_len", m.max_len},
             {"embedding", detail::matrix_to_json(m.embedding)},
             {"gates",
              {{"input", gate(m.input)},
               {"forget", gate(m.forget)},
               {"cell", gate(m.cell)},
               {"output", gate(m.output)}}},
             {"w_out", m.w_out},
             {"b_out", m.b_out}};
  }
  j["model"] = model;
  j["manifest"] = {{"seed", env.manifest.seed},
                   {"hyperparams", env.manifest.hyperparams},
                   {"corpus_fingerprint", env.manifest.corpus_fingerprint}};
  return j;
}

inline ModelEnvelope envelope_from_json(const nlohmann::json& j) {
  ModelEnvelope env;
  if (!j.contains("schema_version") || !j.at("schema_version").is_string())
    throw std::runtime_error("model envelope: missing schema_version (expected " +
                             std::string(kModelSchemaVersion) + ")");
  env.schema_version = j.at("schema_version").get<std::string>();
  if (env.schema_version != kModelSchemaVersion)
    throw std::runtime_error("model envelope: unsupported schema_version '" +
                             env.schema_version + "' (expected " + kModelSchemaVersion + ")");
  env.kind = kind_from_string(j.at("model_kind").get<std::string>());

  const auto& jv = j.at("vocabulary");
  env.vocabulary.max_size = jv.at("max_size").get<std::size_t>();
  env.vocabulary.index_to_token = {"<pad>", "<unk>"};
  for (const auto& tok : jv.at("tokens")) {
    const auto s = tok.get<std::string>();
    env.vocabulary.token_to_index[s] =
        static_cast<std::int32_t>(env.vocabulary.index_to_token.size());
    env.vocabulary.index_to_token.push_back(s);
  }

  if (j.contains("tfidf")) {
    TfidfModel t;
    const auto& jt = j.at("tfidf");
    t.features = jt.at("features").get<std::vector<std::string>>();
    t.idf = jt.at("idf").get<std::vector<double>>();
    t.n_documents = jt.at("n_documents").get<std::uint64_t>();
    t.max_features = jt.at("max_features").get<std::size_t>();
    detail::require_size(t.idf.size(), t.features.size(), "tfidf idf");
    for (std::size_t i = 0; i < t.features.size(); ++i)
      t.feature_index[t.features[i]] = static_cast<std::int32_t>(i);
    env.tfidf = std::move(t);
  }

  const auto& jm = j.at("model");
  if (env.kind == ModelKind::nb) {
    if (!env.tfidf) throw std::runtime_error("model envelope: nb payload requires tfidf");
    NBModel m;
    m.alpha = jm.at("alpha").get<double>();
    const auto prior = jm.at("class_log_prior").get<std::vector<double>>();
    detail::require_size(prior.size(), 2, "class_log_prior");
    m.class_log_prior = {prior[0], prior[1]};
    const auto& fl = jm.at("feature_log_likelihood");
    detail::require_size(fl.size(), 2, "feature_log_likelihood");
    m.feature_log_likelihood[0] = fl.at(0).get<std::vector<double>>();
    m.feature_log_likelihood[1] = fl.at(1).get<std::vector<double>>();
    detail::require_size(m.feature_log_likelihood[0].size(), env.tfidf->feature_count(),
                         "feature_log_likelihood[0]");
    detail::require_size(m.feature_log_likelihood[1].size(), env.tfidf->feature_count(),
                         "feature_log_likelihood[1]");
    env.nb = std::move(m);
  } else if (env.kind == ModelKind::random_forest) {
    if (!env.tfidf) throw std::runtime_error("model envelope: forest payload requires tfidf");
    ForestModel m;
    m.n_features = jm.at("n_features").get<std::size_t>();
    m.seed = jm.at("seed").get<std::uint64_t>();
    detail::require_size(m.n_features, env.tfidf->feature_count(), "forest feature axis");
    for (const auto& jt : jm.at("trees")) {
      DecisionTree tree;
      for (const auto& jn : jt.at("nodes")) {
        TreeNode n;
        n.feature = jn.at("feature").get<std::int32_t>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<std::int32_t>();
        n.right = jn.at("right").get<std::int32_t>();
        const auto counts = jn.at("counts").get<std::vector<std::uint32_t>>();
        detail::require_size(counts.size(), 2, "tree node counts");
        n.counts = {counts[0], counts[1]};
        tree.nodes.push_back(n);
      }
      if (tree.nodes.empty()) throw std::runtime_error("model envelope: empty tree");
      for (const auto& n : tree.nodes) {
        if (n.is_leaf()) continue;
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.n_features ||
            n.left < 0 || n.right < 0 ||
            static_cast<std::size_t>(n.left) >= tree.nodes.size() ||
            static_cast<std::size_t>(n.right) >= tree.nodes.size())
          throw std::runtime_error("model envelope: tree node index out of range");
      }
      m.trees.push_back(std::move(tree));
    }
    env.forest = std::move(m);
  } else if (env.kind == ModelKind::fnn) {
    FnnModel m;
    m.vocab_size = jm.at("vocab_size").get<std::size_t>();
    m.d_embed = jm.at("d_embed").get<std::size_t>();
    m.max_len = jm.at("max_len").get<std::size_t>();
    m.embedding = detail::matrix_from_json(jm.at("embedding"), "fnn embedding");
    detail::require_size(m.embedding.rows, m.vocab_size, "fnn embedding rows");
    detail::require_size(m.embedding.cols, m.d_embed, "fnn embedding cols");
    std::size_t fan_in = m.d_embed;
    for (const auto& jl : jm.at("hidden")) {
      DenseLayer l;
      l.w = detail::matrix_from_json(jl.at("w"), "fnn hidden weight");
      l.b = jl.at("b").get<std::vector<double>>();
      detail::require_size(l.w.cols, fan_in, "fnn hidden fan-in");
      detail::require_size(l.b.size(), l.w.rows, "fnn hidden bias");
      fan_in = l.w.rows;
      m.hidden.push_back(std::move(l));
    }
    m.w_out = jm.at("w_out").get<std::vector<double>>();
    detail::require_size(m.w_out.size(), fan_in, "fnn output weight");
    m.b_out = jm.at("b_out").get<double>();
    detail::require_size(m.vocab_size, env.vocabulary.size(), "fnn vocabulary");
    env.fnn = std::move(m);
  } else {
    LstmModel m;
    m.vocab_size = jm.at("vocab_size").get<std::size_t>();
    m.d_embed = jm.at("d_embed").get<std::size_t>();
    m.hidden = jm.at("hidden_size").get<std::size_t>();
    m.max_len = jm.at("max_len").get<std::size_t>();
    m.embedding = detail::matrix_from_json(jm.at("embedding"), "lstm embedding");
    detail::require_size(m.embedding.rows, m.vocab_size, "lstm embedding rows");
    detail::require_size(m.embedding.cols, m.d_embed, "lstm embedding cols");
    const auto& jg = jm.at("gates");
    const auto gate = [&](const char* name) {
      LstmGate g;
      const auto& jgate = jg.at(name);
      g.w = detail::matrix_from_json(jgate.at("w"), std::string("lstm gate ") + name + " w");
      g.u = detail::matrix_from_json(jgate.at("u"), std::string("lstm gate ") + name + " u");
      g.b = jgate.at("b").get<std::vector<double>>();
      detail::require_size(g.w.rows, m.hidden, "lstm gate rows");
      detail::require_size(g.w.cols, m.d_embed, "lstm gate cols");
      detail::require_size(g.u.rows, m.hidden, "lstm gate u rows");
      detail::require_size(g.u.cols, m.hidden, "lstm gate u cols");
      detail::require_size(g.b.size(), m.hidden, "lstm gate bias");
      return g;
    };
    m.input = gate("input");
    m.forget = gate("forget");
    m.cell = gate("cell");
    m.output = gate("output");
    m.w_out = jm.at("w_out").get<std::vector<double>>();
    detail::require_size(m.w_out.size(), m.hidden, "lstm output weight");
    m.b_out = jm.at("b_out").get<double>();
    detail::require_size(m.vocab_size, env.vocabulary.size(), "lstm vocabulary");
    env.lstm = std::move(m);
  }

  const auto& jman = j.at("manifest");
  env.manifest.seed = jman.at("seed").get<std::uint64_t>();
  env.manifest.hyperparams = jman.at("hyperparams");
  env.manifest.corpus_fingerprint = jman.at("corpus_fingerprint").get<std::string>();
  return env;
}

inline void save_model(const ModelEnvelope& env, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << envelope_to_json(env).dump() << "\n";
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

inline ModelEnvelope load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: " + path + " is not a valid envelope (expected " +
                             std::string(kModelSchemaVersion) + "): " + e.what());
  }
  try {
    return envelope_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: " + path + " is not a valid envelope (expected " +
                             std::string(kModelSchemaVersion) + "): " + e.what());
  }
}

struct EvalResult {
  ConfusionMatrix cm;
  ClassificationReport report;
};

inline EvalResult evaluate_model(const ModelEnvelope& env, const Corpus& corpus) {
  if (corpus.records.empty()) throw std::invalid_argument("evaluate_model: empty corpus");
  if ((env.kind == ModelKind::nb || env.kind == ModelKind::random_forest) && !env.tfidf)
    throw std::runtime_error("evaluate_model: preprocessing mismatch, envelope lacks tfidf");
  std::vector<bool> truth, predicted;
  truth.reserve(corpus.records.size());
  predicted.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) {
    truth.push_back(rec.malicious);
    predicted.push_back(env.predict(rec.text));
  }
  EvalResult out;
  out.cm = confusion_matrix(truth, predicted);
  out.report = classification_report(out.cm);
  return out;
}

}  // namespace pidet
