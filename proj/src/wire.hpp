#pragma once

// JSON mappings shared by the event log, snapshots and the HTTP layer.

#include <json.hpp>

#include "evtriage/triage.hpp"

namespace evtriage::wire {

using nlohmann::json;

json record_to_json(const DocumentRecord& r);
DocumentRecord record_from_json(const json& j);

json prediction_to_json(const PredictionResult& p);
PredictionResult prediction_from_json(const json& j);

json item_to_json(const CurationItem& item);
CurationItem item_from_json(const json& j);

json decision_to_json(const Decision& d);
// Accepts "accept" or {"correct": "<label>"}; throws Error(kInvalidArgument).
Decision decision_from_json(const json& j);

json stats_to_json(const TriageStats& s);

inline std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace evtriage::wire
