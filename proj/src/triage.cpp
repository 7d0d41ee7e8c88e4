#include "evtriage/triage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "evtriage/error.hpp"
#include "wire.hpp"

namespace evtriage {

namespace fs = std::filesystem;
using wire::json;

std::string_view to_string(Backend b) { return b == Backend::kForest ? "forest" : "linear"; }

std::optional<Backend> parse_backend(std::string_view s) {
  if (s == "forest") return Backend::kForest;
  if (s == "linear") return Backend::kLinear;
  return std::nullopt;
}

std::string_view to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::kPending: return "pending";
    case ItemStatus::kAccepted: return "accepted";
    case ItemStatus::kCorrected: return "corrected";
  }
  return "?";
}

Timestamp system_now() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool queue_before(const CurationItem& a, const CurationItem& b) {
  if (a.prediction.entropy != b.prediction.entropy) return a.prediction.entropy > b.prediction.entropy;
  if (a.created_at != b.created_at) return a.created_at < b.created_at;
  return a.id() < b.id();
}

std::vector<CurationItem> enqueue_and_order(std::vector<CurationItem> items) {
  std::erase_if(items, [](const CurationItem& i) { return i.status != ItemStatus::kPending; });
  std::sort(items.begin(), items.end(), queue_before);
  return items;
}

// ---------------------------------------------------------------------------
// Event log

EventLog::EventLog(std::string path) : path_(std::move(path)) {
  // Drop a torn final line so new appends start on a line boundary.
  std::error_code ec;
  if (fs::exists(path_, ec)) {
    std::ifstream in(path_, std::ios::binary);
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!content.empty() && content.back() != '\n') {
      const auto keep = content.find_last_of('\n');
      fs::resize_file(path_, keep == std::string::npos ? 0 : keep + 1, ec);
      if (ec) throw Error(ErrorKind::kIo, "cannot trim event log " + path_ + ": " + ec.message());
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorKind::kIo, "cannot open event log " + path_ + ": " + std::strerror(errno));
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

void EventLog::append(const std::string& line) {
  std::lock_guard lock(mu_);
  std::string buf = line;
  buf.push_back('\n');
  const char* p = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::kIo, "event log write failed: " + std::string(std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    throw Error(ErrorKind::kIo, "event log fsync failed: " + std::string(std::strerror(errno)));
  }
}

namespace {

constexpr const char* kLogFile = "events.jsonl";
constexpr const char* kSnapshotFile = "snapshot.json";
constexpr int kSnapshotFormatVersion = 1;

void apply_parsed(ItemStore& store, const json& ev) {
  const auto seq = ev.at("seq").get<std::uint64_t>();
  if (seq <= store.last_seq) return;  // already covered by the snapshot
  const std::string type = ev.at("type").get<std::string>();
  if (type == "enqueue") {
    CurationItem item = wire::item_from_json(ev.at("item"));
    const std::string id = item.id();
    store.items.insert_or_assign(id, std::move(item));
  } else if (type == "feedback") {
    auto it = store.items.find(ev.at("item_id").get<std::string>());
    if (it == store.items.end()) throw Error(ErrorKind::kFormat, "feedback event for unknown item");
    CurationItem& item = it->second;
    const Decision d = wire::decision_from_json(ev.at("decision"));
    if (const auto* c = std::get_if<Correct>(&d)) {
      item.status = ItemStatus::kCorrected;
      item.final_label = c->label;
    } else {
      item.status = ItemStatus::kAccepted;
      item.final_label = item.prediction.predicted;
    }
    item.resolved_at = ev.at("resolved_at").get<Timestamp>();
    ++store.resolved_since_retrain;
  } else if (type == "retrain") {
    const auto consumed = ev.at("consumed").get<std::size_t>();
    store.resolved_since_retrain -= std::min(consumed, store.resolved_since_retrain);
  } else {
    throw Error(ErrorKind::kFormat, "unknown event type '" + type + "'");
  }
  store.last_seq = seq;
}

json store_to_json(const ItemStore& store) {
  json items = json::array();
  for (const auto& [id, item] : store.items) items.push_back(wire::item_to_json(item));
  return {{"format_version", kSnapshotFormatVersion},
          {"last_seq", store.last_seq},
          {"resolved_since_retrain", store.resolved_since_retrain},
          {"items", std::move(items)}};
}

ItemStore store_from_json(const json& j) {
  if (j.at("format_version").get<int>() != kSnapshotFormatVersion) {
    throw Error(ErrorKind::kFormat, "unsupported snapshot format_version");
  }
  ItemStore store;
  store.last_seq = j.at("last_seq").get<std::uint64_t>();
  store.resolved_since_retrain = j.at("resolved_since_retrain").get<std::size_t>();
  for (const json& item : j.at("items")) {
    CurationItem ci = wire::item_from_json(item);
    const std::string id = ci.id();
    store.items.emplace(id, std::move(ci));
  }
  return store;
}

}  // namespace

void apply_event(ItemStore& store, const std::string& event_line) {
  try {
    apply_parsed(store, json::parse(event_line));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed event: ") + e.what());
  }
}

ItemStore replay_state(const std::string& state_dir) {
  ItemStore store;
  const fs::path dir(state_dir);
  if (std::ifstream snap(dir / kSnapshotFile); snap) {
    try {
      store = store_from_json(json::parse(snap));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kFormat, std::string("malformed snapshot: ") + e.what());
    }
  }
  if (std::ifstream log(dir / kLogFile); log) {
    std::string line;
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      // A torn final line (crash mid-append) is ignored; it was never acknowledged.
      if (log.peek() == EOF && json::parse(line, nullptr, false).is_discarded()) break;
      apply_event(store, line);
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Service

TriageService::TriageService(TriageConfig config, std::shared_ptr<EmbeddingProvider> provider)
    : config_(std::move(config)), provider_(std::move(provider)) {
  if (!config_.clock) config_.clock = system_now;
  if (!config_.state_dir.empty()) {
    fs::create_directories(config_.state_dir);
    store_ = replay_state(config_.state_dir);
    log_ = std::make_unique<EventLog>((fs::path(config_.state_dir) / kLogFile).string());
  }
  std::lock_guard lock(stats_mu_);
  for (const auto& [id, item] : store_.items) {
    if (item.status != ItemStatus::kPending) ++stats_.items_resolved;
  }
}

TriageService::~TriageService() = default;

void TriageService::load_forest(ForestBundle bundle) {
  auto ptr = std::make_shared<const ForestBundle>(std::move(bundle));
  std::lock_guard lock(model_mu_);
  forest_ = std::move(ptr);
  ++forest_version_;
}

void TriageService::load_linear(LinearModel model) {
  if (provider_ && model.dimension != provider_->dimension()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "linear head expects dimension " + std::to_string(model.dimension) +
                    " but the embedding provider produces " + std::to_string(provider_->dimension()));
  }
  auto ptr = std::make_shared<const LinearModel>(std::move(model));
  std::lock_guard lock(model_mu_);
  linear_ = std::move(ptr);
  ++linear_version_;
}

void TriageService::set_training_corpus(std::vector<DocumentRecord> labeled) {
  std::erase_if(labeled, [](const DocumentRecord& r) { return !r.label; });
  std::lock_guard lock(retrain_mu_);
  training_corpus_ = std::move(labeled);
}

Backend TriageService::default_backend() const {
  std::lock_guard lock(model_mu_);
  return linear_ ? Backend::kLinear : Backend::kForest;
}

Classification TriageService::classify_text(const std::string& text, Backend backend) {
  Classification out;
  out.backend = backend;
  if (backend == Backend::kForest) {
    std::shared_ptr<const ForestBundle> forest;
    {
      std::lock_guard lock(model_mu_);
      forest = forest_;
      out.model_version = forest_version_;
    }
    if (!forest) throw Error(ErrorKind::kNoModel, "no forest model loaded");
    out.result = predict_forest(forest->model, featurize(text, forest->vocabulary));
  } else {
    std::shared_ptr<const LinearModel> linear;
    {
      std::lock_guard lock(model_mu_);
      linear = linear_;
      out.model_version = linear_version_;
    }
    if (!linear) throw Error(ErrorKind::kNoModel, "no linear model loaded");
    if (!provider_) throw Error(ErrorKind::kNoModel, "no embedding provider configured");
    const std::string texts[] = {text};
    const auto emb = provider_->embed(texts);
    out.result = forward(*linear, emb.at(0));
  }
  std::lock_guard lock(stats_mu_);
  ++stats_.documents_classified;
  ++stats_.predictions_per_class[index_of(out.result.predicted)];
  return out;
}

Classification TriageService::classify(std::string_view title, std::string_view abstract_text,
                                       std::optional<Backend> backend) {
  std::string text;
  text.reserve(title.size() + abstract_text.size() + 1);
  text.append(title).append(" ").append(abstract_text);
  return classify_text(text, backend.value_or(default_backend()));
}

void TriageService::log_and_apply(const std::string& event_line) {
  if (log_) log_->append(event_line);
  apply_event(store_, event_line);
  if (log_ && ++events_since_snapshot_ >= config_.snapshot_every) {
    write_snapshot_locked();
    events_since_snapshot_ = 0;
  }
}

void TriageService::write_snapshot_locked() {
  const fs::path dir(config_.state_dir);
  const fs::path tmp = dir / (std::string(kSnapshotFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write snapshot " + tmp.string());
    out << wire::dump(store_to_json(store_)) << '\n';
    if (!out.flush()) throw Error(ErrorKind::kIo, "short write to snapshot " + tmp.string());
  }
  fs::rename(tmp, dir / kSnapshotFile);
}

EnqueueResult TriageService::enqueue(const std::vector<DocumentRecord>& records,
                                     std::optional<Backend> backend) {
  const Backend b = backend.value_or(default_backend());
  EnqueueResult result;
  for (const DocumentRecord& rec : records) {
    {
      std::lock_guard lock(store_mu_);
      if (store_.items.contains(rec.id)) {
        ++result.skipped_duplicates;
        continue;
      }
    }
    CurationItem item;
    item.record = rec;
    item.backend = b;
    item.prediction = classify_text(rec.classification_text(), b).result;
    std::lock_guard lock(store_mu_);
    if (store_.items.contains(rec.id)) {
      ++result.skipped_duplicates;
      continue;
    }
    item.created_at = config_.clock();
    const json ev = {{"seq", store_.last_seq + 1}, {"type", "enqueue"}, {"item", wire::item_to_json(item)}};
    log_and_apply(wire::dump(ev));
    ++result.enqueued;
  }
  return result;
}

std::vector<CurationItem> TriageService::queue(std::size_t limit) const {
  std::vector<CurationItem> pending;
  {
    std::lock_guard lock(store_mu_);
    for (const auto& [id, item] : store_.items) {
      if (item.status == ItemStatus::kPending) pending.push_back(item);
    }
  }
  auto ordered = enqueue_and_order(std::move(pending));
  if (ordered.size() > limit) ordered.resize(limit);
  return ordered;
}

std::optional<CurationItem> TriageService::item(const std::string& id) const {
  std::lock_guard lock(store_mu_);
  auto it = store_.items.find(id);
  if (it == store_.items.end()) return std::nullopt;
  return it->second;
}

std::size_t TriageService::pending_count() const {
  std::lock_guard lock(store_mu_);
  return static_cast<std::size_t>(std::count_if(store_.items.begin(), store_.items.end(), [](const auto& kv) {
    return kv.second.status == ItemStatus::kPending;
  }));
}

CurationItem TriageService::record_feedback(const std::string& item_id, const Decision& decision) {
  std::lock_guard lock(store_mu_);
  auto it = store_.items.find(item_id);
  if (it == store_.items.end()) throw Error(ErrorKind::kUnknownItem, "unknown item '" + item_id + "'");
  if (it->second.status != ItemStatus::kPending) {
    throw Error(ErrorKind::kAlreadyResolved, "item '" + item_id + "' is already resolved");
  }
  if (const auto* c = std::get_if<Correct>(&decision); c && c->label == it->second.prediction.predicted) {
    throw Error(ErrorKind::kSameLabel, "a correction must change the predicted label");
  }
  const json ev = {{"seq", store_.last_seq + 1},
                   {"type", "feedback"},
                   {"item_id", item_id},
                   {"decision", wire::decision_to_json(decision)},
                   {"resolved_at", config_.clock()}};
  log_and_apply(wire::dump(ev));
  {
    std::lock_guard slock(stats_mu_);
    ++stats_.items_resolved;
  }
  return store_.items.at(item_id);
}

std::shared_ptr<const LinearModel> TriageService::retrain_from_feedback(std::size_t min_new_labels) {
  std::lock_guard retrain_lock(retrain_mu_);
  std::vector<DocumentRecord> corpus = training_corpus_;
  std::size_t consumed = 0;
  {
    std::lock_guard lock(store_mu_);
    consumed = store_.resolved_since_retrain;
    if (consumed < min_new_labels) return nullptr;
    for (const auto& [id, item] : store_.items) {
      if (item.final_label) {
        DocumentRecord r = item.record;
        r.label = item.final_label;
        corpus.push_back(std::move(r));
      }
    }
  }
  if (!provider_) throw Error(ErrorKind::kNoModel, "no embedding provider configured");
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "nothing to retrain on");

  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& r : corpus) texts.push_back(r.classification_text());
  auto embeddings = provider_->embed(texts);
  std::vector<LabeledEmbedding> dataset;
  dataset.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    dataset.push_back({std::move(embeddings[i]), *corpus[i].label});
  }
  auto model = std::make_shared<const LinearModel>(train_linear(dataset, config_.linear_hyperparams));

  {
    std::lock_guard lock(store_mu_);
    const json ev = {{"seq", store_.last_seq + 1}, {"type", "retrain"}, {"consumed", consumed}};
    log_and_apply(wire::dump(ev));
  }
  std::lock_guard lock(model_mu_);
  linear_ = model;
  ++linear_version_;
  return model;
}

TriageStats TriageService::stats() const {
  std::lock_guard lock(stats_mu_);
  TriageStats s = stats_;
  s.estimated_minutes_saved = kMinutesPerManualReview * static_cast<double>(s.documents_classified);
  return s;
}

ModelVersions TriageService::model_versions() const {
  std::lock_guard lock(model_mu_);
  return {forest_ ? forest_version_ : 0, linear_ ? linear_version_ : 0};
}

ItemStore TriageService::snapshot_store() const {
  std::lock_guard lock(store_mu_);
  return store_;
}

}  // namespace evtriage
