// pidet: train, evaluate, and serve prompt-injection classifiers.
//
// Exit codes: 0 success, 2 input/usage error, 3 environment error
// (port in use, store not writable).

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pidet/corpus.hpp"
#include "pidet/envelope.hpp"
#include "pidet/manifest.hpp"
#include "pidet/metrics.hpp"
#include "pidet/naive_bayes.hpp"
#include "pidet/nn.hpp"
#include "pidet/random_forest.hpp"
#include "pidet/server.hpp"
#include "pidet/text.hpp"
#include "pidet/tfidf.hpp"
#include "pidet/training.hpp"

namespace {

// Environment errors (exit 3) as opposed to bad input (exit 2).
struct EnvironmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_sidecar_manifest(const std::string& command, std::uint64_t seed,
                            nlohmann::json config, const std::vector<std::string>& inputs,
                            const std::vector<std::string>& outputs, double elapsed) {
  pidet::RunManifest m;
  m.command = command;
  m.seed = seed;
  m.outputs = outputs;
  for (const auto& in : inputs) m.inputs.push_back({in, pidet::file_fingerprint(in)});
  nlohmann::json fps = nlohmann::json::object();
  for (const auto& out : outputs) fps[out] = pidet::file_fingerprint(out);
  config["output_fingerprints"] = fps;
  m.config = std::move(config);
  m.elapsed_seconds = elapsed;
  pidet::write_manifest(m, outputs.at(0) + ".manifest.json");
}

std::vector<std::vector<std::string>> tokenize_corpus(const pidet::Corpus& corpus) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.records.size());
  for (const auto& r : corpus.records) docs.push_back(pidet::tokenize(pidet::normalize(r.text)));
  return docs;
}

struct IngestArgs {
  std::string hackaprompt, squad, out;
  std::uint64_t seed = 0;
};

int cmd_ingest(const IngestArgs& a) {
  Timer timer;
  std::ifstream hp(a.hackaprompt, std::ios::binary);
  if (!hp) throw std::runtime_error("cannot open " + a.hackaprompt);
  auto parsed = pidet::parse_hackaprompt(hp);
  for (const auto& err : parsed.errors)
    std::cerr << "ingest: " << a.hackaprompt << ":" << err.line << ": " << err.message << "\n";

  pidet::Rng keyword_rng = pidet::make_rng(pidet::mix_seed(a.seed, 1));
  for (auto& sub : parsed.submissions)
    sub.user_input = pidet::randomize_keyword(sub.user_input, "PWNED", keyword_rng);
  const auto kept = pidet::filter_submissions(std::move(parsed.submissions));

  std::ifstream sq(a.squad, std::ios::binary);
  if (!sq) throw std::runtime_error("cannot open " + a.squad);
  nlohmann::json squad_doc;
  try {
    sq >> squad_doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(a.squad + ": invalid JSON: " + e.what());
  }

  std::vector<pidet::LabeledPrompt> labeled;
  for (const auto& sub : kept)
    labeled.push_back({sub.user_input, true, pidet::Source::hackaprompt});
  for (const auto& context : pidet::parse_squad(squad_doc))
    for (auto& sentence : pidet::segment_sentences(context))
      labeled.push_back({std::move(sentence), false, pidet::Source::squad});

  labeled = pidet::dedup(std::move(labeled));
  std::vector<pidet::LabeledPrompt> malicious, benign;
  for (auto& r : labeled) (r.malicious ? malicious : benign).push_back(std::move(r));
  if (malicious.empty() || benign.empty())
    throw std::runtime_error("ingest: no records survived for " +
                             std::string(malicious.empty() ? "malicious" : "benign") + " class");

  pidet::Rng balance_rng = pidet::make_rng(pidet::mix_seed(a.seed, 2));
  pidet::Corpus corpus = pidet::balance(std::move(malicious), std::move(benign), balance_rng);
  corpus.seed = a.seed;
  pidet::write_corpus(corpus, a.out);

  nlohmann::json config = {
      {"class_counts",
       {{"malicious", corpus.count(true)}, {"benign", corpus.count(false)}}},
      {"hackaprompt_parse_errors", parsed.errors.size()}};
  write_sidecar_manifest("ingest", a.seed, config, {a.hackaprompt, a.squad}, {a.out},
                         timer.seconds());
  std::cerr << "ingest: wrote " << corpus.records.size() << " records (" << corpus.count(true)
            << " malicious, " << corpus.count(false) << " benign) to " << a.out << "\n";
  return 0;
}

struct SynthArgs {
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  Timer timer;
  pidet::Corpus corpus = pidet::generate_synthetic_corpus(a.n, a.seed);
  pidet::write_corpus(corpus, a.out);
  nlohmann::json config = {{"n", a.n}, {"template_version", "synth/1"}};
  write_sidecar_manifest("synth", a.seed, config, {}, {a.out}, timer.seconds());
  std::cerr << "synth: wrote " << corpus.records.size() << " records to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus, kind, out;
  std::uint64_t seed = 0;
  std::size_t epochs = 25;
  std::size_t batch_size = 96;
  double lr = 0.001;
  std::size_t max_features = 1000;
  std::size_t max_len = 128;
  std::size_t vocab_size = 20000;
  std::size_t d_embed = 64;
  std::size_t trees = 100;
  double alpha = 1.0;
};

pidet::EncodedDataset encode_corpus(const pidet::Corpus& corpus, const pidet::Vocabulary& vocab,
                                    std::size_t max_len) {
  pidet::EncodedDataset data;
  data.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    data.push_back({pidet::encode_sequence(pidet::tokenize(pidet::normalize(r.text)), vocab,
                                           max_len),
                    r.malicious});
  }
  return data;
}

void write_history(const pidet::TrainingHistory& history, const std::string& path) {
  nlohmann::json epochs = nlohmann::json::array();
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const auto& e = history.epochs[i];
    epochs.push_back({{"epoch", i + 1},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << nlohmann::json{{"epochs", epochs}}.dump(2) << "\n";
}

int cmd_train(const TrainArgs& a) {
  Timer timer;
  const pidet::ModelKind kind = pidet::kind_from_string(a.kind);
  pidet::Corpus corpus = pidet::read_corpus(a.corpus);
  pidet::Rng split_rng = pidet::make_rng(a.seed);
  pidet::SplitCorpus sp = pidet::split(corpus, 0.8, split_rng);

  pidet::ModelEnvelope env;
  env.kind = kind;
  env.manifest.seed = a.seed;
  env.manifest.corpus_fingerprint = pidet::file_fingerprint(a.corpus);

  const auto train_docs = tokenize_corpus(sp.train);
  env.vocabulary = pidet::build_vocabulary(train_docs, a.vocab_size);

  nlohmann::json hyper = {{"kind", pidet::to_string(kind)}, {"seed", a.seed}};
  std::vector<std::string> outputs = {a.out};

  if (kind == pidet::ModelKind::nb || kind == pidet::ModelKind::random_forest) {
    env.tfidf = pidet::fit_tfidf(train_docs, a.max_features);
    std::vector<pidet::SparseVector> X;
    std::vector<bool> y;
    X.reserve(train_docs.size());
    for (std::size_t i = 0; i < train_docs.size(); ++i) {
      X.push_back(pidet::transform_tfidf(*env.tfidf, train_docs[i]));
      y.push_back(sp.train.records[i].malicious);
    }
    hyper["max_features"] = a.max_features;
    if (kind == pidet::ModelKind::nb) {
      hyper["alpha"] = a.alpha;
      env.nb = pidet::train_nb(X, y, env.tfidf->feature_count(), a.alpha);
    } else {
      hyper["n_trees"] = a.trees;
      env.forest =
          pidet::train_random_forest(X, y, env.tfidf->feature_count(), a.trees, a.seed);
    }
  } else {
    pidet::HyperParams hp;
    hp.learning_rate = a.lr;
    hp.epochs = a.epochs;
    hp.d_embed = a.d_embed;
    hp.max_len = a.max_len;
    hp.seed = a.seed;
    const auto train_set = encode_corpus(sp.train, env.vocabulary, a.max_len);
    const auto val_set = encode_corpus(sp.test, env.vocabulary, a.max_len);
    hp.batch_size = std::min(a.batch_size, train_set.size());
    if (hp.batch_size != a.batch_size)
      std::cerr << "train: batch size clamped to training-set size " << hp.batch_size << "\n";
    hyper["epochs"] = hp.epochs;
    hyper["batch_size"] = hp.batch_size;
    hyper["learning_rate"] = hp.learning_rate;
    hyper["d_embed"] = hp.d_embed;
    hyper["max_len"] = hp.max_len;
    pidet::TrainingHistory history;
    if (kind == pidet::ModelKind::fnn) {
      hyper["hidden"] = hp.fnn_hidden;
      auto model = pidet::init_fnn(env.vocabulary.size(), hp);
      history = pidet::train_network(model, train_set, val_set, hp);
      env.fnn = std::move(model);
    } else {
      hyper["hidden"] = hp.lstm_hidden;
      auto model = pidet::init_lstm(env.vocabulary.size(), hp);
      history = pidet::train_network(model, train_set, val_set, hp);
      env.lstm = std::move(model);
    }
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
      const auto& e = history.epochs[i];
      std::fprintf(stderr,
                   "train: epoch %zu/%zu train_loss=%.4f train_acc=%.4f val_loss=%.4f "
                   "val_acc=%.4f\n",
                   i + 1, history.epochs.size(), e.train_loss, e.train_accuracy, e.val_loss,
                   e.val_accuracy);
    }
    write_history(history, a.out + ".history.json");
    outputs.push_back(a.out + ".history.json");
  }

  env.manifest.hyperparams = hyper;
  pidet::save_model(env, a.out);
  write_sidecar_manifest("train", a.seed, {{"hyperparams", hyper}}, {a.corpus}, outputs,
                         timer.seconds());
  std::cerr << "train: wrote " << pidet::to_string(kind) << " envelope to " << a.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string model, corpus, out;
  std::int64_t tp = -1, fn = -1, fp = -1, tn = -1;
};

void print_evaluation(const pidet::ConfusionMatrix& cm, const pidet::ClassificationReport& rep) {
  std::cout << pidet::render_report(rep);
  std::cout << "\nconfusion: tp=" << cm.tp << " fn=" << cm.fn << " fp=" << cm.fp
            << " tn=" << cm.tn << "\n";
}

int cmd_evaluate(const EvaluateArgs& a) {
  Timer timer;
  const bool report_only = a.tp >= 0 || a.fn >= 0 || a.fp >= 0 || a.tn >= 0;
  pidet::ConfusionMatrix cm;
  if (report_only) {
    if (a.tp < 0 || a.fn < 0 || a.fp < 0 || a.tn < 0)
      throw CLI::ValidationError("evaluate", "report-only mode needs all of --tp --fn --fp --tn");
    cm.tp = static_cast<std::uint64_t>(a.tp);
    cm.fn = static_cast<std::uint64_t>(a.fn);
    cm.fp = static_cast<std::uint64_t>(a.fp);
    cm.tn = static_cast<std::uint64_t>(a.tn);
  } else {
    if (a.model.empty() || a.corpus.empty())
      throw CLI::ValidationError("evaluate", "need --model and --corpus (or raw counts)");
    const auto env = pidet::load_model(a.model);
    const auto corpus = pidet::read_corpus(a.corpus);
    cm = pidet::evaluate_model(env, corpus).cm;
  }
  const auto rep = pidet::classification_report(cm);
  print_evaluation(cm, rep);
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + a.out);
    out << pidet::report_to_json(cm, rep).dump(2) << "\n";
    out.close();
    std::vector<std::string> inputs;
    if (!report_only) inputs = {a.model, a.corpus};
    write_sidecar_manifest("evaluate", 0, nlohmann::json::object(), inputs, {a.out},
                           timer.seconds());
  }
  return 0;
}

struct ReportArgs {
  std::string corpus, cls = "malicious", out;
  std::size_t top_k = 10;
};

int cmd_report(const ReportArgs& a) {
  Timer timer;
  if (a.top_k < 1) throw CLI::ValidationError("report", "--top-k must be >= 1");
  const bool malicious = a.cls == "malicious";
  if (!malicious && a.cls != "benign")
    throw CLI::ValidationError("report", "--class must be malicious or benign");
  const auto corpus = pidet::read_corpus(a.corpus);
  std::vector<std::string> docs;
  for (const auto& r : corpus.records)
    if (r.malicious == malicious) docs.push_back(r.text);
  const auto tokens = pidet::token_frequency_report(docs, a.top_k);
  std::string listing;
  for (const auto& [token, count] : tokens)
    listing += token + "\t" + std::to_string(count) + "\n";
  std::cout << listing;
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + a.out);
    out << listing;
    out.close();
    write_sidecar_manifest("report", 0, {{"class", a.cls}, {"top_k", a.top_k}}, {a.corpus},
                           {a.out}, timer.seconds());
  }
  return 0;
}

struct ClassifyArgs {
  std::string model, text;
  bool text_given = false;
};

int cmd_classify(const ClassifyArgs& a) {
  const auto env = pidet::load_model(a.model);
  const auto emit = [&](const std::string& line) {
    const double score = env.score(line);
    std::printf("%s\t%.6f\t%s\n", score > 0.5 ? "malicious" : "benign", score, line.c_str());
  };
  if (a.text_given) {
    emit(a.text);
  } else {
    std::string line;
    while (std::getline(std::cin, line)) emit(line);
  }
  return 0;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config_path) {
  const auto cfg = pidet::load_gateway_config(config_path);
  auto model = pidet::load_model(cfg.model_path);
  {
    std::ofstream probe(cfg.store_path, std::ios::binary | std::ios::app);
    if (!probe) throw EnvironmentError("event store not writable: " + cfg.store_path);
  }
  std::unique_ptr<pidet::UpstreamClient> upstream;
  if (cfg.upstream_url.empty())
    upstream = std::make_unique<pidet::CannedUpstream>("OK");
  else
    upstream = std::make_unique<pidet::HttpUpstream>(cfg.upstream_url);
  pidet::GatewayService service(cfg, std::move(model), std::move(upstream));
  if (service.corrupt_events() > 0)
    std::cerr << "serve: skipped " << service.corrupt_events() << " corrupt event lines\n";

  httplib::Server server;
  // Skip SO_REUSEPORT (httplib's default on Linux) so a second instance on
  // the same port fails instead of silently sharing it.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  pidet::attach_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  if (!server.bind_to_port(cfg.listen_host, cfg.listen_port))
    throw EnvironmentError("cannot bind " + cfg.listen_host + ":" +
                           std::to_string(cfg.listen_port) + " (port in use?)");
  std::cerr << "serve: listening on " << cfg.listen_host << ":" << cfg.listen_port << "\n";
  server.listen_after_bind();
  std::cerr << "serve: shut down\n";
  return 0;
}

// CLI11 only resolves config files and environment variables on the root
// app, after flag parsing, so neither reaches subcommand options in the
// documented precedence order (flag > env > config file > default). Both are
// resolved here instead: any value not already pinned by a real flag is
// appended as a synthetic flag, environment first, then config-file keys.
void apply_launch_defaults(std::vector<std::string>& args) {
  using FlagEnv = std::pair<const char*, const char*>;
  static const std::map<std::string, std::vector<FlagEnv>> table = {
      {"ingest", {{"--out", "PIDET_OUT"}, {"--seed", "PIDET_SEED"}}},
      {"synth", {{"--out", "PIDET_OUT"}, {"--seed", "PIDET_SEED"}}},
      {"train",
       {{"--kind", "PIDET_KIND"},
        {"--out", "PIDET_OUT"},
        {"--seed", "PIDET_SEED"},
        {"--epochs", "PIDET_EPOCHS"},
        {"--batch-size", "PIDET_BATCH_SIZE"},
        {"--lr", "PIDET_LR"},
        {"--max-features", "PIDET_MAX_FEATURES"},
        {"--max-len", "PIDET_MAX_LEN"}}},
      {"evaluate", {{"--model", "PIDET_MODEL"}, {"--out", "PIDET_OUT"}}},
      {"report", {{"--top-k", "PIDET_TOP_K"}, {"--out", "PIDET_OUT"}}},
      {"classify", {{"--model", "PIDET_MODEL"}}},
  };
  const auto sub = std::find_if(args.begin(), args.end(),
                                [](const std::string& a) { return !a.starts_with("-"); });
  if (sub == args.end()) return;
  const auto entry = table.find(*sub);
  if (entry == table.end()) return;

  const auto has_flag = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };

  for (const auto& [flag, env] : entry->second) {
    if (has_flag(flag)) continue;
    const char* value = std::getenv(env);
    if (value == nullptr || *value == '\0') continue;
    args.push_back(flag);
    args.push_back(value);
  }

  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      config_path = args[i].substr(9);
  }
  if (config_path.empty())
    if (const char* v = std::getenv("PIDET_CONFIG"); v != nullptr && *v != '\0')
      config_path = v;
  if (config_path.empty()) return;

  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + config_path);
  for (const auto& item : CLI::ConfigTOML{}.from_config(in)) {
    if (!item.parents.empty())
      throw std::runtime_error(config_path + ": unexpected section " + item.fullname());
    const std::string flag = "--" + item.name;
    if (has_flag(flag)) continue;
    args.push_back(flag);
    for (const auto& value : item.inputs) args.push_back(value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt-injection detection toolkit"};
  app.require_subcommand(1);
  std::string defaults_path;

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "build a labeled corpus from raw datasets");
  ingest->add_option("--config", defaults_path, "key=value defaults file")
      ->envname("PIDET_CONFIG");
  ingest->add_option("--hackaprompt", ingest_args.hackaprompt, "submissions JSONL")->required();
  ingest->add_option("--squad", ingest_args.squad, "reading-comprehension JSON")->required();
  ingest->add_option("--out", ingest_args.out, "corpus output path")
      ->envname("PIDET_OUT")
      ->required();
  ingest->add_option("--seed", ingest_args.seed, "RNG seed")->envname("PIDET_SEED");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("--config", defaults_path, "key=value defaults file")
      ->envname("PIDET_CONFIG");
  synth->add_option("--n", synth_args.n, "record count (even, >= 10)");
  synth->add_option("--seed", synth_args.seed, "RNG seed")->envname("PIDET_SEED");
  synth->add_option("--out", synth_args.out, "corpus output path")
      ->envname("PIDET_OUT")
      ->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a classifier on a corpus");
  train->add_option("--config", defaults_path, "key=value defaults file")
      ->envname("PIDET_CONFIG");
  train->add_option("--corpus", train_args.corpus, "corpus path")->required();
  train->add_option("--kind", train_args.kind, "nb | rf | fnn | lstm")
      ->envname("PIDET_KIND")
      ->required();
  train->add_option("--out", train_args.out, "model envelope output path")
      ->envname("PIDET_OUT")
      ->required();
  train->add_option("--seed", train_args.seed, "RNG seed")->envname("PIDET_SEED");
  train->add_option("--epochs", train_args.epochs, "training epochs")->envname("PIDET_EPOCHS");
  train->add_option("--batch-size", train_args.batch_size, "mini-batch size")
      ->envname("PIDET_BATCH_SIZE");
  train->add_option("--lr", train_args.lr, "learning rate")->envname("PIDET_LR");
  train->add_option("--max-features", train_args.max_features, "TF-IDF feature cap")
      ->envname("PIDET_MAX_FEATURES");
  train->add_option("--max-len", train_args.max_len, "sequence length cap")
      ->envname("PIDET_MAX_LEN");
  train->add_option("--vocab-size", train_args.vocab_size, "vocabulary cap");
  train->add_option("--d-embed", train_args.d_embed, "embedding width");
  train->add_option("--trees", train_args.trees, "forest size");
  train->add_option("--alpha", train_args.alpha, "NB smoothing");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "score a model on a corpus, or format raw counts");
  evaluate->add_option("--config", defaults_path, "key=value defaults file")
      ->envname("PIDET_CONFIG");
  evaluate->add_option("--model", eval_args.model, "model envelope path")->envname("PIDET_MODEL");
  evaluate->add_option("--corpus", eval_args.corpus, "corpus path");
  evaluate->add_option("--out", eval_args.out, "report JSON output path")->envname("PIDET_OUT");
  evaluate->add_option("--tp", eval_args.tp, "true positives (report-only mode)");
  evaluate->add_option("--fn", eval_args.fn, "false negatives (report-only mode)");
  evaluate->add_option("--fp", eval_args.fp, "false positives (report-only mode)");
  evaluate->add_option("--tn", eval_args.tn, "true negatives (report-only mode)");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "token frequency listing for one class");
  report->add_option("--config", defaults_path, "key=value defaults file")
      ->envname("PIDET_CONFIG");
  report->add_option("--corpus", report_args.corpus, "corpus path")->required();
  report->add_option("--class", report_args.cls, "malicious | benign");
  report->add_option("--top-k", report_args.top_k, "tokens to list")->envname("PIDET_TOP_K");
  report->add_option("--out", report_args.out, "listing output path")->envname("PIDET_OUT");

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "classify text from --text or stdin");
  classify->add_option("--config", defaults_path, "key=value defaults file")
      ->envname("PIDET_CONFIG");
  classify->add_option("--model", classify_args.model, "model envelope path")
      ->envname("PIDET_MODEL")
      ->required();
  auto* text_opt = classify->add_option("--text", classify_args.text, "single text to classify");

  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "run the filtering gateway");
  serve->add_option("--config", serve_config, "gateway config JSON")
      ->envname("PIDET_CONFIG")
      ->required();

  app.name(argv[0]);
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    apply_launch_defaults(args);
  } catch (const std::exception& e) {
    std::cerr << "pidet: " << e.what() << "\n";
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  classify_args.text_given = text_opt->count() > 0;

  try {
    if (app.got_subcommand(ingest)) return cmd_ingest(ingest_args);
    if (app.got_subcommand(synth)) return cmd_synth(synth_args);
    if (app.got_subcommand(train)) return cmd_train(train_args);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(eval_args);
    if (app.got_subcommand(report)) return cmd_report(report_args);
    if (app.got_subcommand(classify)) return cmd_classify(classify_args);
    if (app.got_subcommand(serve)) return cmd_serve(serve_config);
  } catch (const EnvironmentError& e) {
    std::cerr << "pidet: " << e.what() << "\n";
    return 3;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "pidet: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pidet: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
