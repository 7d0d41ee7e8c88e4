#include <cmath>
#include <string>

#include "evtriage/doc_class.hpp"
#include "evtriage/error.hpp"
#include "evtriage/prediction.hpp"

namespace evtriage {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kEmptyVocabulary: return "empty-vocabulary";
    case ErrorKind::kEmptyNode: return "empty-node";
    case ErrorKind::kLengthMismatch: return "length-mismatch";
    case ErrorKind::kZeroBaseline: return "zero-baseline";
    case ErrorKind::kBadRatio: return "bad-ratio";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kTransport: return "transport-error";
    case ErrorKind::kTimeout: return "timeout";
    case ErrorKind::kBadDimension: return "bad-dimension";
    case ErrorKind::kNonFiniteValue: return "non-finite-value";
    case ErrorKind::kFormat: return "format-error";
    case ErrorKind::kVocabularyMismatch: return "vocabulary-mismatch";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kNoModel: return "no-model-loaded";
    case ErrorKind::kUnknownItem: return "unknown-item";
    case ErrorKind::kAlreadyResolved: return "already-resolved";
    case ErrorKind::kSameLabel: return "correct-to-same-label";
  }
  return "unknown";
}

std::string_view to_string(DocClass c) {
  switch (c) {
    case DocClass::kBroadSynthesis: return "broad_synthesis";
    case DocClass::kSystematicReview: return "systematic_review";
    case DocClass::kPrimaryRct: return "primary_rct";
    case DocClass::kPrimaryNonRct: return "primary_non_rct";
    case DocClass::kExcluded: return "excluded";
  }
  return "?";
}

std::string_view display_name(DocClass c) {
  switch (c) {
    case DocClass::kBroadSynthesis: return "Broad synthesis";
    case DocClass::kSystematicReview: return "Systematic review";
    case DocClass::kPrimaryRct: return "Primary rct";
    case DocClass::kPrimaryNonRct: return "Primary non-rct";
    case DocClass::kExcluded: return "Excluded";
  }
  return "?";
}

std::optional<DocClass> parse_doc_class(std::string_view label) {
  std::string norm;
  bool pending_sep = false;
  for (char ch : label) {
    const bool sep = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '_' || ch == '-';
    if (sep) {
      pending_sep = !norm.empty();
      continue;
    }
    if (pending_sep) norm.push_back('_');
    pending_sep = false;
    norm.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
  }
  for (DocClass c : kAllClasses) {
    if (norm == to_string(c)) return c;
  }
  return std::nullopt;
}

std::size_t argmax(const ClassVector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double entropy_nats(const ClassVector& p) {
  double h = 0.0;
  for (double pk : p) {
    if (pk > 0.0) h -= pk * std::log(pk);
  }
  return h;
}

PredictionResult make_prediction(const ClassVector& probabilities) {
  PredictionResult r;
  r.probabilities = probabilities;
  r.predicted = class_at(argmax(probabilities));
  r.entropy = entropy_nats(probabilities);
  return r;
}

}  // namespace evtriage
