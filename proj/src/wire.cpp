#include "wire.hpp"

#include "evtriage/error.hpp"

namespace evtriage::wire {

namespace {

DocClass class_from_json(const json& j) {
  auto c = parse_doc_class(j.get<std::string>());
  if (!c) throw Error(ErrorKind::kInvalidArgument, "unknown class label " + j.dump());
  return *c;
}

ItemStatus status_from_string(const std::string& s) {
  for (ItemStatus st : {ItemStatus::kPending, ItemStatus::kAccepted, ItemStatus::kCorrected}) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorKind::kFormat, "unknown item status '" + s + "'");
}

}  // namespace

json record_to_json(const DocumentRecord& r) {
  json j = {{"id", r.id},
            {"title", r.title},
            {"abstract", r.abstract_text},
            {"source", std::string(to_string(r.source))}};
  if (r.label) j["label"] = std::string(to_string(*r.label));
  return j;
}

DocumentRecord record_from_json(const json& j) {
  DocumentRecord r;
  r.id = j.at("id").get<std::string>();
  r.title = j.value("title", "");
  r.abstract_text = j.value("abstract", "");
  r.source = parse_source(j.value("source", "other")).value_or(Source::kOther);
  if (j.contains("label") && !j["label"].is_null()) r.label = class_from_json(j["label"]);
  return r;
}

json prediction_to_json(const PredictionResult& p) {
  return {{"predicted", std::string(to_string(p.predicted))},
          {"probabilities", p.probabilities},
          {"entropy", p.entropy}};
}

PredictionResult prediction_from_json(const json& j) {
  PredictionResult p;
  p.predicted = class_from_json(j.at("predicted"));
  p.probabilities = j.at("probabilities").get<ClassVector>();
  p.entropy = j.at("entropy").get<double>();
  return p;
}

json item_to_json(const CurationItem& item) {
  json j = {{"id", item.id()},
            {"record", record_to_json(item.record)},
            {"prediction", prediction_to_json(item.prediction)},
            {"backend", std::string(to_string(item.backend))},
            {"status", std::string(to_string(item.status))},
            {"final_label", nullptr},
            {"created_at", item.created_at},
            {"resolved_at", nullptr}};
  if (item.final_label) j["final_label"] = std::string(to_string(*item.final_label));
  if (item.resolved_at) j["resolved_at"] = *item.resolved_at;
  return j;
}

CurationItem item_from_json(const json& j) {
  CurationItem item;
  item.record = record_from_json(j.at("record"));
  item.prediction = prediction_from_json(j.at("prediction"));
  auto backend = parse_backend(j.at("backend").get<std::string>());
  if (!backend) throw Error(ErrorKind::kFormat, "unknown backend in item");
  item.backend = *backend;
  item.status = status_from_string(j.at("status").get<std::string>());
  if (!j.at("final_label").is_null()) item.final_label = class_from_json(j["final_label"]);
  item.created_at = j.at("created_at").get<Timestamp>();
  if (!j.at("resolved_at").is_null()) item.resolved_at = j["resolved_at"].get<Timestamp>();
  return item;
}

json decision_to_json(const Decision& d) {
  if (const auto* c = std::get_if<Correct>(&d)) {
    return {{"correct", std::string(to_string(c->label))}};
  }
  return "accept";
}

Decision decision_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "accept") return Accept{};
  if (j.is_object() && j.size() == 1 && j.contains("correct") && j["correct"].is_string()) {
    auto c = parse_doc_class(j["correct"].get<std::string>());
    if (!c) throw Error(ErrorKind::kInvalidArgument, "unknown correction label " + j["correct"].dump());
    return Correct{*c};
  }
  throw Error(ErrorKind::kInvalidArgument,
              "decision must be \"accept\" or {\"correct\": <label>}, got " + j.dump());
}

json stats_to_json(const TriageStats& s) {
  json per_class = json::object();
  for (DocClass c : kAllClasses) {
    per_class[std::string(to_string(c))] = s.predictions_per_class[index_of(c)];
  }
  return {{"documents_classified", s.documents_classified},
          {"items_resolved", s.items_resolved},
          {"predictions_per_class", std::move(per_class)},
          {"estimated_minutes_saved", s.estimated_minutes_saved}};
}

}  // namespace evtriage::wire
