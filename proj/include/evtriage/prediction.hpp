#pragma once

#include "evtriage/doc_class.hpp"

namespace evtriage {

struct PredictionResult {
  DocClass predicted = DocClass::kBroadSynthesis;
  ClassVector probabilities{};
  double entropy = 0.0;  // nats

  bool operator==(const PredictionResult&) const = default;
};

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(const ClassVector& v);

// -sum p ln p with 0 ln 0 = 0.
double entropy_nats(const ClassVector& p);

// Builds a result from an already-normalized distribution.
PredictionResult make_prediction(const ClassVector& probabilities);

}  // namespace evtriage
