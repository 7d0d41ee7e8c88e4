#include "evtriage/ingest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "evtriage/error.hpp"

namespace evtriage {

using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kPubmed: return "pubmed";
    case Source::kEmbase: return "embase";
    case Source::kMedrxiv: return "medrxiv";
    case Source::kBiorxiv: return "biorxiv";
    case Source::kOther: return "other";
  }
  return "other";
}

std::optional<Source> parse_source(std::string_view s) {
  std::string lower;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t') continue;
    lower.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
  }
  for (Source src : {Source::kPubmed, Source::kEmbase, Source::kMedrxiv, Source::kBiorxiv,
                     Source::kOther}) {
    if (lower == to_string(src)) return src;
  }
  return std::nullopt;
}

std::string_view to_string(RecordErrorKind k) {
  switch (k) {
    case RecordErrorKind::kMalformedLine: return "malformed-line";
    case RecordErrorKind::kMissingId: return "missing-id";
    case RecordErrorKind::kEmptyText: return "empty-text";
    case RecordErrorKind::kUnknownLabel: return "unknown-label";
    case RecordErrorKind::kUnknownSource: return "unknown-source";
  }
  return "?";
}

std::string DocumentRecord::classification_text() const {
  std::string text;
  text.reserve(title.size() + abstract_text.size() + 1);
  text += title;
  text += ' ';
  text += abstract_text;
  return text;
}

namespace {

bool is_blank(std::string_view line) {
  for (char ch : line) {
    if (ch != ' ' && ch != '\t' && ch != '\r' && ch != '\n') return false;
  }
  return true;
}

// Optional string field; nullopt when absent or null, error when another type.
std::optional<std::string> string_field(const json& obj, const char* name, bool& type_error) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    type_error = true;
    return std::nullopt;
  }
  return it->get<std::string>();
}

}  // namespace

std::optional<DocumentRecord> parse_record_line(std::string_view line, std::size_t line_no,
                                                std::vector<RecordError>& errors,
                                                std::vector<RecordError>& warnings) {
  auto fail = [&](RecordErrorKind kind, std::string reason) -> std::optional<DocumentRecord> {
    errors.push_back({line_no, kind, std::move(reason)});
    return std::nullopt;
  };

  json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded()) return fail(RecordErrorKind::kMalformedLine, "not valid JSON");
  if (!obj.is_object()) return fail(RecordErrorKind::kMalformedLine, "record is not an object");

  bool type_error = false;
  auto id = string_field(obj, "id", type_error);
  if (type_error || !id || id->empty()) {
    return fail(RecordErrorKind::kMissingId, "missing or empty string field 'id'");
  }
  auto title = string_field(obj, "title", type_error);
  auto abstract_text = string_field(obj, "abstract", type_error);
  auto source = string_field(obj, "source", type_error);
  auto label = string_field(obj, "label", type_error);
  if (type_error) {
    return fail(RecordErrorKind::kMalformedLine, "field of wrong type (strings expected)");
  }

  DocumentRecord rec;
  rec.id = std::move(*id);
  rec.title = title.value_or("");
  rec.abstract_text = abstract_text.value_or("");
  if (is_blank(rec.title) && is_blank(rec.abstract_text)) {
    return fail(RecordErrorKind::kEmptyText, "record '" + rec.id + "' has no title or abstract");
  }
  if (label && !is_blank(*label)) {
    rec.label = parse_doc_class(*label);
    if (!rec.label) {
      return fail(RecordErrorKind::kUnknownLabel, "unknown label '" + *label + "'");
    }
  }
  if (source && !source->empty()) {
    if (auto s = parse_source(*source)) {
      rec.source = *s;
    } else {
      warnings.push_back({line_no, RecordErrorKind::kUnknownSource,
                          "unknown source '" + *source + "', using 'other'"});
      rec.source = Source::kOther;
    }
  }
  return rec;
}

ParseResult parse_corpus(std::istream& in) {
  ParseResult out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    if (auto rec = parse_record_line(line, line_no, out.errors, out.warnings)) {
      out.records.push_back(std::move(*rec));
    }
  }
  return out;
}

ParseResult parse_corpus_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_corpus(in);
}

ParseResult load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open corpus file: " + path);
  return parse_corpus(in);
}

std::string serialize_record(const DocumentRecord& r) {
  json obj = {{"id", r.id},
              {"title", r.title},
              {"abstract", r.abstract_text},
              {"source", std::string(to_string(r.source))}};
  if (r.label) obj["label"] = std::string(to_string(*r.label));
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

DedupResult dedup(std::vector<DocumentRecord> records) {
  DedupResult out;
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());
  out.records.reserve(records.size());
  for (auto& r : records) {
    if (seen.insert(r.id).second) {
      out.records.push_back(std::move(r));
    } else {
      ++out.removed;
    }
  }
  return out;
}

}  // namespace evtriage
