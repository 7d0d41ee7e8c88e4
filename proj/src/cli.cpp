#include "evtriage/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "evtriage/embed.hpp"
#include "evtriage/error.hpp"
#include "evtriage/eval.hpp"
#include "evtriage/forest.hpp"
#include "evtriage/ingest.hpp"
#include "evtriage/kernels.hpp"
#include "evtriage/linear.hpp"
#include "evtriage/server.hpp"
#include "evtriage/synth.hpp"
#include "evtriage/textpipe.hpp"
#include "evtriage/triage.hpp"

namespace evtriage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kReferenceDocsPerHour = 32000.0;

constexpr const char* kVocabFile = "vocab.json";
constexpr const char* kForestFile = "forest.json";
constexpr const char* kLinearFile = "linear.json";
constexpr const char* kEmbedderFile = "embedder.json";

struct CommonOptions {
  std::vector<std::string> corpus;
  std::string model_dir;
  std::string backend = "forest";
  std::uint64_t seed = 42;
  double test_ratio = 0.0;
  std::string provider = "stub";
  std::string endpoint;
  std::size_t dimension = kDefaultEmbeddingDimension;
  std::uint64_t stub_seed = 7;
  std::string embedding_cache;
  std::size_t threads = 1;
};

struct TrainOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_samples_leaf = 2;
  std::size_t features_per_split = 0;
  bool uniform_weights = false;
  std::size_t min_df = 2;
  double max_df_ratio = 0.9;
  double learning_rate = 0.1;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double l2_lambda = 1e-4;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state_dir;
  std::string training_corpus;
  std::size_t min_new_labels = 25;
  std::string config_file;
};

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return kIoError;
    case ErrorKind::kVocabularyMismatch:
    case ErrorKind::kDimensionMismatch:
    case ErrorKind::kBadDimension:
    case ErrorKind::kFormat: return kModelDataMismatch;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kBadRatio: return kBadFlags;
    default: return kFailure;
  }
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Failure{kBadFlags, std::string(what) + " path is required"};
  if (!fs::is_regular_file(path)) throw Failure{kIoError, std::string(what) + " not found: " + path};
}

void require_dir(const std::string& path) {
  if (path.empty()) throw Failure{kBadFlags, "--model directory is required"};
  if (!fs::is_directory(path)) throw Failure{kIoError, "model directory not found: " + path};
}

std::vector<DocumentRecord> load_corpora(const std::vector<std::string>& paths, std::ostream& err) {
  if (paths.empty()) throw Failure{kBadFlags, "--corpus is required"};
  for (const auto& p : paths) require_file(p, "corpus");
  std::vector<DocumentRecord> all;
  for (const auto& p : paths) {
    ParseResult parsed = load_corpus_file(p);
    for (const auto& e : parsed.errors) {
      err << p << ":" << e.line << ": " << to_string(e.kind) << ": " << e.reason << "\n";
    }
    for (const auto& w : parsed.warnings) err << p << ":" << w.line << ": warning: " << w.reason << "\n";
    for (auto& r : parsed.records) all.push_back(std::move(r));
  }
  DedupResult d = dedup(std::move(all));
  if (d.removed > 0) err << "dropped " << d.removed << " duplicate record ids\n";
  return std::move(d.records);
}

std::vector<DocClass> labels_of(const std::vector<DocumentRecord>& docs) {
  std::vector<DocClass> labels;
  labels.reserve(docs.size());
  for (const auto& d : docs) {
    if (!d.label) throw Failure{kModelDataMismatch, "record '" + d.id + "' has no label"};
    labels.push_back(*d.label);
  }
  return labels;
}

// Applies --test-ratio: returns (train, test); with ratio 0 everything is train.
std::pair<std::vector<DocumentRecord>, std::vector<DocumentRecord>> split_corpus(
    const std::vector<DocumentRecord>& docs, double ratio, std::uint64_t seed) {
  if (ratio == 0.0) return {docs, {}};
  const auto labels = labels_of(docs);
  return stratified_split<DocumentRecord>(docs, labels, ratio, seed);
}

ProviderConfig provider_config(const CommonOptions& o) {
  ProviderConfig pc;
  pc.mode = o.provider == "remote" ? ProviderMode::kRemote : ProviderMode::kStub;
  pc.endpoint = o.endpoint;
  pc.dimension = o.dimension;
  pc.stub_seed = o.stub_seed;
  return pc;
}

std::shared_ptr<EmbeddingProvider> make_embedder(const CommonOptions& o,
                                                 std::shared_ptr<EmbeddingCache>* cache_out = nullptr) {
  std::shared_ptr<EmbeddingProvider> p = make_provider(provider_config(o));
  if (!o.embedding_cache.empty()) {
    auto cache = std::make_shared<EmbeddingCache>(o.embedding_cache);
    if (cache_out) *cache_out = cache;
    p = std::make_shared<CachingProvider>(p, cache);
  }
  return p;
}

json embedder_manifest(const EmbeddingProvider& p) {
  return {{"identity", p.identity()}, {"dimension", p.dimension()}};
}

void check_embedder(const std::string& model_dir, const EmbeddingProvider& p) {
  const fs::path path = fs::path(model_dir) / kEmbedderFile;
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  const json m = json::parse(in, nullptr, false);
  if (m.is_discarded()) throw Failure{kModelDataMismatch, "malformed " + path.string()};
  if (m.value("dimension", std::size_t{0}) != p.dimension() || m.value("identity", "") != p.identity()) {
    throw Failure{kModelDataMismatch, "linear head was trained with embedder " + m.dump() +
                                          ", current provider is " + embedder_manifest(p).dump()};
  }
}

std::vector<LabeledEmbedding> embed_labeled(EmbeddingProvider& provider,
                                            const std::vector<DocumentRecord>& docs) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.classification_text());
  auto embs = provider.embed(texts);
  std::vector<LabeledEmbedding> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out.push_back({std::move(embs[i]), *docs[i].label});
  return out;
}

bool wants(const std::string& backend, const char* name) { return backend == name || backend == "both"; }

// Runs fn(i) for i in [0, n) on `threads` workers; fn writes to slot i.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

struct LoadedModels {
  std::optional<ForestBundle> forest;
  std::optional<LinearModel> linear;
};

LoadedModels load_models(const std::string& dir, const std::string& backend) {
  require_dir(dir);
  LoadedModels m;
  const fs::path root(dir);
  if (wants(backend, "forest")) {
    require_file((root / kVocabFile).string(), "vocabulary");
    require_file((root / kForestFile).string(), "forest model");
    Vocabulary vocab = Vocabulary::load((root / kVocabFile).string());
    ForestModel model = ForestModel::load((root / kForestFile).string(), vocab);
    m.forest = ForestBundle{std::move(vocab), std::move(model)};
  }
  if (wants(backend, "linear")) {
    require_file((root / kLinearFile).string(), "linear model");
    m.linear = LinearModel::load((root / kLinearFile).string());
  }
  return m;
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonOptions& o, const TrainOptions& t, std::ostream& out, std::ostream& err) {
  auto docs = load_corpora(o.corpus, err);
  if (o.model_dir.empty()) throw Failure{kBadFlags, "--model directory is required"};
  auto [train, test] = split_corpus(docs, o.test_ratio, o.seed);
  const auto labels = labels_of(train);
  if (train.empty()) throw Failure{kModelDataMismatch, "no labeled training records"};
  fs::create_directories(o.model_dir);
  const fs::path root(o.model_dir);

  json summary = {{"train_documents", train.size()}, {"test_documents", test.size()}};
  if (wants(o.backend, "forest")) {
    std::vector<TokenList> tokens;
    tokens.reserve(train.size());
    for (const auto& d : train) tokens.push_back(tokenize(d.classification_text()));
    const Vocabulary vocab = build_vocabulary(tokens, {t.min_df, t.max_df_ratio});
    std::vector<LabeledSparse> data;
    data.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      data.push_back({tfidf_transform(vectorize_counts(tokens[i], vocab), vocab), labels[i]});
    }
    ForestParams fp;
    fp.n_trees = t.n_trees;
    fp.max_depth = t.max_depth;
    fp.min_samples_leaf = t.min_samples_leaf;
    fp.features_per_split = t.features_per_split;
    fp.seed = o.seed;
    fp.threads = o.threads;
    if (t.uniform_weights) fp.class_weights = uniform_weights();
    const ForestModel model = train_forest(data, fp, vocab.content_hash());
    vocab.save((root / kVocabFile).string());
    model.save((root / kForestFile).string());
    summary["forest"] = {{"vocabulary_size", vocab.size()}, {"trees", model.trees().size()}};
  }
  if (wants(o.backend, "linear")) {
    std::shared_ptr<EmbeddingCache> cache;
    auto provider = make_embedder(o, &cache);
    const auto data = embed_labeled(*provider, train);
    LinearHyperparams hp;
    hp.learning_rate = t.learning_rate;
    hp.epochs = t.epochs;
    hp.batch_size = t.batch_size;
    hp.l2_lambda = t.l2_lambda;
    hp.seed = o.seed;
    if (t.uniform_weights) hp.class_weights = uniform_weights();
    double final_loss = 0.0;
    const LinearModel model = train_linear(data, hp, [&](const EpochReport& r) { final_loss = r.loss; });
    model.save((root / kLinearFile).string());
    std::ofstream((root / kEmbedderFile).string()) << embedder_manifest(*provider).dump() << '\n';
    if (cache) cache->flush();
    summary["linear"] = {{"dimension", model.dimension}, {"final_loss", final_loss}};
  }
  out << summary.dump() << '\n';
  return kOk;
}

int cmd_eval(const CommonOptions& o, const std::string& report_json, const std::string& confusion_csv,
             std::ostream& out, std::ostream& err) {
  auto docs = load_corpora(o.corpus, err);
  auto models = load_models(o.model_dir, o.backend);
  auto eval_docs = o.test_ratio > 0.0 ? split_corpus(docs, o.test_ratio, o.seed).second : docs;
  const auto golds = labels_of(eval_docs);
  if (eval_docs.empty()) throw Failure{kModelDataMismatch, "no labeled records to evaluate"};

  std::shared_ptr<EmbeddingProvider> provider;
  if (models.linear) {
    provider = make_embedder(o);
    check_embedder(o.model_dir, *provider);
  }

  json reports = json::object();
  std::optional<MetricsReport> forest_report, linear_report;
  auto evaluate = [&](const char* name, auto&& predict_one) {
    std::vector<DocClass> preds(eval_docs.size());
    parallel_for(eval_docs.size(), o.threads, [&](std::size_t i) { preds[i] = predict_one(eval_docs[i]); });
    MetricsReport r = metrics(confusion(golds, preds));
    out << render_table(r, std::string("Model: ") + name) << '\n';
    reports[name] = json::parse(report_to_json(r));
    if (!confusion_csv.empty()) {
      const std::string path = o.backend == "both" ? confusion_csv + "." + name + ".csv" : confusion_csv;
      std::ofstream csv(path);
      if (!csv) throw Failure{kIoError, "cannot write " + path};
      csv << confusion_to_csv(r.confusion);
    }
    return r;
  };
  if (models.forest) {
    const auto& fb = *models.forest;
    forest_report = evaluate("forest", [&](const DocumentRecord& d) {
      return predict_forest(fb.model, featurize(d.classification_text(), fb.vocabulary)).predicted;
    });
  }
  if (models.linear) {
    // Embed in bulk so remote providers see batches, then predict.
    std::vector<std::string> texts;
    for (const auto& d : eval_docs) texts.push_back(d.classification_text());
    const auto embs = provider->embed(texts);
    std::unordered_map<const DocumentRecord*, std::size_t> pos;
    for (std::size_t i = 0; i < eval_docs.size(); ++i) pos[&eval_docs[i]] = i;
    const auto& lm = *models.linear;
    linear_report = evaluate("linear", [&](const DocumentRecord& d) { return forward(lm, embs[pos.at(&d)]).predicted; });
  }
  if (forest_report && linear_report && forest_report->macro_f1 > 0.0) {
    const double imp = relative_improvement(*forest_report, *linear_report);
    reports["relative_improvement_linear_over_forest"] = imp;
    reports["note"] = kImprovementNote;
    char line[96];
    std::snprintf(line, sizeof line, "macro-F1 relative improvement (linear over forest): %+.3f\n", imp);
    out << line << kImprovementNote << "\n";
  }
  out << reports.dump() << '\n';
  if (!report_json.empty()) {
    std::ofstream f(report_json);
    if (!f) throw Failure{kIoError, "cannot write " + report_json};
    f << reports.dump(2) << '\n';
  }
  return kOk;
}

int cmd_classify(const CommonOptions& o, const std::string& output, std::ostream& out, std::ostream& err) {
  if (o.backend == "both") throw Failure{kBadFlags, "classify needs --backend forest or linear"};
  auto docs = load_corpora(o.corpus, err);
  auto models = load_models(o.model_dir, o.backend);

  std::vector<PredictionResult> results(docs.size());
  if (models.forest) {
    const auto& fb = *models.forest;
    parallel_for(docs.size(), o.threads, [&](std::size_t i) {
      results[i] = predict_forest(fb.model, featurize(docs[i].classification_text(), fb.vocabulary));
    });
  } else {
    auto provider = make_embedder(o);
    check_embedder(o.model_dir, *provider);
    std::vector<std::string> texts;
    for (const auto& d : docs) texts.push_back(d.classification_text());
    const auto embs = provider->embed(texts);
    parallel_for(docs.size(), o.threads, [&](std::size_t i) { results[i] = forward(*models.linear, embs[i]); });
  }

  std::ofstream file;
  std::ostream* sink = &out;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw Failure{kIoError, "cannot write " + output};
    sink = &file;
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& r = results[i];
    json line = {{"id", docs[i].id},
                 {"predicted", std::string(to_string(r.predicted))},
                 {"probabilities", r.probabilities},
                 {"entropy", r.entropy},
                 {"backend", o.backend}};
    *sink << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  return kOk;
}

std::atomic<HttpFrontend*> g_frontend{nullptr};

extern "C" void on_signal(int) {
  if (HttpFrontend* f = g_frontend.load()) f->stop();
}

int cmd_serve(CommonOptions o, ServeOptions s, std::ostream& out, std::ostream& err) {
  if (!s.config_file.empty()) {
    require_file(s.config_file, "config file");
    std::ifstream in(s.config_file);
    const json cfg = json::parse(in, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) throw Failure{kBadFlags, "config file must hold a JSON object"};
    s.host = cfg.value("host", s.host);
    s.port = cfg.value("port", s.port);
    s.state_dir = cfg.value("state_dir", s.state_dir);
    s.training_corpus = cfg.value("training_corpus", s.training_corpus);
    s.min_new_labels = cfg.value("min_new_labels", s.min_new_labels);
    o.model_dir = cfg.value("model", o.model_dir);
    o.provider = cfg.value("provider", o.provider);
    o.endpoint = cfg.value("endpoint", o.endpoint);
    o.dimension = cfg.value("dimension", o.dimension);
    o.stub_seed = cfg.value("stub_seed", o.stub_seed);
    o.embedding_cache = cfg.value("embedding_cache", o.embedding_cache);
  }
  require_dir(o.model_dir);
  const fs::path root(o.model_dir);
  auto provider = make_embedder(o);

  TriageConfig tc;
  tc.state_dir = s.state_dir;
  tc.min_new_labels = s.min_new_labels;
  tc.linear_hyperparams.seed = o.seed;
  TriageService service(tc, provider);
  bool any = false;
  if (fs::exists(root / kForestFile)) {
    auto m = load_models(o.model_dir, "forest");
    service.load_forest(std::move(*m.forest));
    any = true;
  }
  if (fs::exists(root / kLinearFile)) {
    check_embedder(o.model_dir, *provider);
    auto m = load_models(o.model_dir, "linear");
    service.load_linear(std::move(*m.linear));
    any = true;
  }
  if (!any) err << "warning: no models in " << o.model_dir << "; /classify will answer 503\n";
  if (!s.training_corpus.empty()) service.set_training_corpus(load_corpora({s.training_corpus}, err));

  HttpFrontend frontend(service);
  g_frontend = &frontend;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  out << "listening on http://" << s.host << ":" << s.port << std::endl;
  const bool ok = frontend.listen(s.host, s.port);
  g_frontend = nullptr;
  if (!ok) throw Failure{kIoError, "cannot bind " + s.host + ":" + std::to_string(s.port)};
  return kOk;
}

int cmd_bench(const CommonOptions& o, std::size_t n_docs, std::ostream& out, std::ostream& err) {
  std::vector<DocumentRecord> docs;
  if (!o.corpus.empty()) {
    docs = load_corpora(o.corpus, err);
  } else {
    SynthOptions so;
    so.n_documents = n_docs;
    so.seed = o.seed;
    so.id_prefix = "bench";
    docs = generate_corpus(so);
  }
  std::optional<ForestBundle> bundle;
  if (!o.model_dir.empty()) {
    bundle = std::move(load_models(o.model_dir, "forest").forest);
  } else {
    // Fit a default forest on a separate synthetic corpus.
    SynthOptions so;
    so.seed = o.seed + 1;
    so.id_prefix = "fit";
    const auto fit = generate_corpus(so);
    std::vector<TokenList> tokens;
    for (const auto& d : fit) tokens.push_back(tokenize(d.classification_text()));
    Vocabulary vocab = build_vocabulary(tokens);
    std::vector<LabeledSparse> data;
    for (std::size_t i = 0; i < fit.size(); ++i) {
      data.push_back({tfidf_transform(vectorize_counts(tokens[i], vocab), vocab), *fit[i].label});
    }
    ForestParams fp;
    fp.seed = o.seed;
    fp.threads = o.threads;
    ForestModel model = train_forest(data, fp, vocab.content_hash());
    bundle = ForestBundle{std::move(vocab), std::move(model)};
  }

  std::vector<DocClass> preds(docs.size());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(docs.size(), o.threads, [&](std::size_t i) {
    preds[i] = predict_forest(bundle->model, featurize(docs[i].classification_text(), bundle->vocabulary)).predicted;
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double per_hour = seconds > 0.0 ? static_cast<double>(docs.size()) / seconds * 3600.0 : 0.0;
  const json report = {{"documents", docs.size()},
                       {"seconds", seconds},
                       {"docs_per_hour", per_hour},
                       {"reference_docs_per_hour", kReferenceDocsPerHour},
                       {"ratio_to_reference", per_hour / kReferenceDocsPerHour},
                       {"threads", o.threads},
                       {"kernels", std::string(kernels::to_string(kernels::active_isa()))}};
  char line[160];
  std::snprintf(line, sizeof line, "%zu documents in %.3f s: %.0f docs/hour (%.1fx the 32,000 docs/hour reference)\n",
                docs.size(), seconds, per_hour, per_hour / kReferenceDocsPerHour);
  out << line << report.dump() << '\n';
  return kOk;
}

int cmd_synth(std::size_t n, std::uint64_t seed, const std::string& output, std::ostream& out) {
  SynthOptions so;
  so.n_documents = n;
  so.seed = seed;
  const auto docs = generate_corpus(so);
  std::ofstream file;
  std::ostream* sink = &out;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw Failure{kIoError, "cannot write " + output};
    sink = &file;
  }
  for (const auto& d : docs) *sink << serialize_record(d) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"evtriage: evidence-class triage for biomedical abstracts"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonOptions common;
  TrainOptions topt;
  ServeOptions sopt;
  std::string report_json, confusion_csv, output;
  std::size_t bench_docs = 10000, synth_docs = 5000;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--corpus", common.corpus, "Line-delimited corpus file(s)");
    sub->add_option("--model", common.model_dir, "Model directory");
    sub->add_option("--backend", common.backend, "forest | linear | both")
        ->check(CLI::IsMember({"forest", "linear", "both"}));
    sub->add_option("--seed", common.seed, "Seed for splits and training");
    sub->add_option("--test-ratio", common.test_ratio, "Hold-out fraction for a stratified split (0 = none)")
        ->check(CLI::Range(0.0, 0.999));
    sub->add_option("--provider", common.provider, "Embedding provider")->check(CLI::IsMember({"stub", "remote"}));
    sub->add_option("--endpoint", common.endpoint, "Remote embedding service base URL");
    sub->add_option("--dimension", common.dimension, "Embedding dimension")->check(CLI::PositiveNumber);
    sub->add_option("--stub-seed", common.stub_seed, "Seed of the stub embedder");
    sub->add_option("--embedding-cache", common.embedding_cache, "Embedding cache file");
    sub->add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "Fit the forest and/or linear head");
  add_common(train);
  train->add_option("--trees", topt.n_trees)->check(CLI::PositiveNumber);
  train->add_option("--max-depth", topt.max_depth)->check(CLI::PositiveNumber);
  train->add_option("--min-samples-leaf", topt.min_samples_leaf)->check(CLI::PositiveNumber);
  train->add_option("--features-per-split", topt.features_per_split, "0 = ceil(sqrt(V))");
  train->add_flag("--uniform-weights", topt.uniform_weights, "Disable inverse-frequency class weights");
  train->add_option("--min-df", topt.min_df)->check(CLI::PositiveNumber);
  train->add_option("--max-df-ratio", topt.max_df_ratio)->check(CLI::Range(1e-9, 1.0));
  train->add_option("--learning-rate", topt.learning_rate)->check(CLI::PositiveNumber);
  train->add_option("--epochs", topt.epochs);
  train->add_option("--batch-size", topt.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--l2", topt.l2_lambda)->check(CLI::NonNegativeNumber);

  auto* eval = app.add_subcommand("eval", "Evaluate models on a labeled corpus");
  add_common(eval);
  eval->add_option("--report-json", report_json, "Also write the machine-readable report here");
  eval->add_option("--confusion-csv", confusion_csv, "Write the confusion matrix as CSV");

  auto* classify = app.add_subcommand("classify", "Predict one JSON line per input document");
  add_common(classify);
  classify->add_option("--output", output, "Output file (default stdout)");

  auto* serve = app.add_subcommand("serve", "Run the triage HTTP service");
  add_common(serve);
  serve->add_option("--host", sopt.host);
  serve->add_option("--port", sopt.port)->check(CLI::Range(0, 65535));
  serve->add_option("--state-dir", sopt.state_dir, "Event log and snapshot directory (empty = memory only)");
  serve->add_option("--training-corpus", sopt.training_corpus, "Labeled corpus used when retraining");
  serve->add_option("--min-new-labels", sopt.min_new_labels);
  serve->add_option("--config", sopt.config_file, "JSON config file");

  auto* bench = app.add_subcommand("bench", "Measure tokenize + TF-IDF + forest throughput");
  add_common(bench);
  bench->add_option("--documents", bench_docs, "Synthetic documents when --corpus is absent")
      ->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Write a labeled synthetic corpus");
  synth->add_option("--documents", synth_docs)->check(CLI::PositiveNumber);
  synth->add_option("--seed", common.seed);
  synth->add_option("--output", output);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kBadFlags;
  }

  try {
    if (*train) return cmd_train(common, topt, out, err);
    if (*eval) return cmd_eval(common, report_json, confusion_csv, out, err);
    if (*classify) return cmd_classify(common, output, out, err);
    if (*serve) return cmd_serve(common, sopt, out, err);
    if (*bench) return cmd_bench(common, bench_docs, out, err);
    if (*synth) return cmd_synth(synth_docs, common.seed, output, out);
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kBadFlags;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace evtriage::cli
