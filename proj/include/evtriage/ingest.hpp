#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evtriage/doc_class.hpp"

namespace evtriage {

enum class Source { kPubmed, kEmbase, kMedrxiv, kBiorxiv, kOther };

std::string_view to_string(Source s);
std::optional<Source> parse_source(std::string_view s);

struct DocumentRecord {
  std::string id;
  std::string title;
  std::string abstract_text;
  Source source = Source::kOther;
  std::optional<DocClass> label;

  // Text fed to both classifier backends: title + " " + abstract.
  std::string classification_text() const;

  bool operator==(const DocumentRecord&) const = default;
};

enum class RecordErrorKind {
  kMalformedLine,
  kMissingId,
  kEmptyText,
  kUnknownLabel,
  kUnknownSource,  // warning only; the record is kept with Source::kOther
};

std::string_view to_string(RecordErrorKind k);

struct RecordError {
  std::size_t line = 0;  // 1-based
  RecordErrorKind kind = RecordErrorKind::kMalformedLine;
  std::string reason;
};

struct ParseResult {
  std::vector<DocumentRecord> records;
  std::vector<RecordError> errors;
  // Non-fatal notes (unknown sources). Not counted as errors.
  std::vector<RecordError> warnings;
};

// Parses one JSON object per line. Blank lines are skipped; every other line
// yields exactly one record or one error.
ParseResult parse_corpus(std::istream& in);
ParseResult parse_corpus_text(std::string_view text);
ParseResult load_corpus_file(const std::string& path);

// Parses a single line; line_no is used only for error reporting.
std::optional<DocumentRecord> parse_record_line(std::string_view line,
                                                std::size_t line_no,
                                                std::vector<RecordError>& errors,
                                                std::vector<RecordError>& warnings);

std::string serialize_record(const DocumentRecord& r);

struct DedupResult {
  std::vector<DocumentRecord> records;
  std::size_t removed = 0;
};

// First occurrence of each id wins; relative order is preserved.
DedupResult dedup(std::vector<DocumentRecord> records);

}  // namespace evtriage
