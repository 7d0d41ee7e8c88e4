#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evtriage/embed.hpp"
#include "evtriage/forest.hpp"
#include "evtriage/ingest.hpp"
#include "evtriage/linear.hpp"
#include "evtriage/prediction.hpp"
#include "evtriage/textpipe.hpp"

namespace evtriage {

enum class Backend { kForest, kLinear };
std::string_view to_string(Backend b);
std::optional<Backend> parse_backend(std::string_view s);

enum class ItemStatus { kPending, kAccepted, kCorrected };
std::string_view to_string(ItemStatus s);

using Timestamp = std::int64_t;  // microseconds since the Unix epoch
using Clock = std::function<Timestamp()>;
Timestamp system_now();

struct CurationItem {
  DocumentRecord record;
  PredictionResult prediction;
  Backend backend = Backend::kForest;
  ItemStatus status = ItemStatus::kPending;
  std::optional<DocClass> final_label;
  Timestamp created_at = 0;
  std::optional<Timestamp> resolved_at;

  const std::string& id() const { return record.id; }
  bool operator==(const CurationItem&) const = default;
};

// Total order for the review queue: entropy desc, created_at asc, id asc.
bool queue_before(const CurationItem& a, const CurationItem& b);

// Pending items only, in queue order.
std::vector<CurationItem> enqueue_and_order(std::vector<CurationItem> items);

struct Accept {};
struct Correct {
  DocClass label;
};
using Decision = std::variant<Accept, Correct>;

struct TriageStats {
  std::uint64_t documents_classified = 0;
  std::uint64_t items_resolved = 0;
  std::array<std::uint64_t, kNumClasses> predictions_per_class{};
  double estimated_minutes_saved = 0.0;
};

inline constexpr double kMinutesPerManualReview = 2.0;

// Forest backend bundle: the vocabulary it was trained against plus the trees.
struct ForestBundle {
  Vocabulary vocabulary;
  ForestModel model;
};

// Items keyed by id plus the event bookkeeping needed to rebuild them.
struct ItemStore {
  std::map<std::string, CurationItem> items;
  std::uint64_t last_seq = 0;
  std::size_t resolved_since_retrain = 0;

  bool operator==(const ItemStore&) const = default;
};

// Append-only line-delimited event log. Each append is written and fsynced
// before returning; appends are serialized internally.
class EventLog {
 public:
  explicit EventLog(std::string path);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  void append(const std::string& line);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  int fd_ = -1;
  std::mutex mu_;
};

// Applies one serialized event to the store. Used by live serving and replay.
void apply_event(ItemStore& store, const std::string& event_line);
// Snapshot (if present) followed by every logged event with a larger seq.
ItemStore replay_state(const std::string& state_dir);

struct TriageConfig {
  // Empty keeps everything in memory (no log, no snapshot).
  std::string state_dir;
  std::size_t snapshot_every = 200;
  std::size_t min_new_labels = 25;
  LinearHyperparams linear_hyperparams;
  Clock clock = system_now;
};

struct Classification {
  PredictionResult result;
  Backend backend = Backend::kForest;
  std::uint64_t model_version = 0;
};

struct ModelVersions {
  std::uint64_t forest = 0;  // 0 = not loaded
  std::uint64_t linear = 0;
};

struct EnqueueResult {
  std::size_t enqueued = 0;
  std::size_t skipped_duplicates = 0;
};

class TriageService {
 public:
  TriageService(TriageConfig config, std::shared_ptr<EmbeddingProvider> provider);
  ~TriageService();

  void load_forest(ForestBundle bundle);
  void load_linear(LinearModel model);
  // Labeled documents the linear head is retrained on together with feedback.
  void set_training_corpus(std::vector<DocumentRecord> labeled);

  Classification classify(std::string_view title, std::string_view abstract_text,
                          std::optional<Backend> backend = std::nullopt);

  // Classifies and queues new records. Ids already known are skipped.
  EnqueueResult enqueue(const std::vector<DocumentRecord>& records,
                        std::optional<Backend> backend = std::nullopt);

  std::vector<CurationItem> queue(std::size_t limit) const;
  std::optional<CurationItem> item(const std::string& id) const;

  CurationItem record_feedback(const std::string& item_id, const Decision& decision);

  // Retrains the linear head on the training corpus plus every resolved item
  // when at least min_new_labels decisions arrived since the last retrain.
  // The serving model is replaced only on success.
  std::shared_ptr<const LinearModel> retrain_from_feedback(std::size_t min_new_labels);

  TriageStats stats() const;
  std::size_t default_min_new_labels() const { return config_.min_new_labels; }
  ModelVersions model_versions() const;
  ItemStore snapshot_store() const;
  std::size_t pending_count() const;

 private:
  Backend default_backend() const;
  Classification classify_text(const std::string& text, Backend backend);
  void log_and_apply(const std::string& event_line);
  void write_snapshot_locked();

  TriageConfig config_;
  std::shared_ptr<EmbeddingProvider> provider_;
  std::unique_ptr<EventLog> log_;

  mutable std::mutex model_mu_;
  std::shared_ptr<const ForestBundle> forest_;
  std::shared_ptr<const LinearModel> linear_;
  std::uint64_t forest_version_ = 0;
  std::uint64_t linear_version_ = 0;

  mutable std::mutex store_mu_;
  ItemStore store_;
  std::size_t events_since_snapshot_ = 0;

  std::mutex retrain_mu_;
  std::vector<DocumentRecord> training_corpus_;

  mutable std::mutex stats_mu_;
  TriageStats stats_;
};

}  // namespace evtriage
