#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evtriage/doc_class.hpp"
#include "evtriage/error.hpp"
#include "evtriage/rng.hpp"

namespace evtriage {

// Rows are gold classes, columns predicted classes, canonical order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> cells{};

  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t gold) const;
  std::uint64_t column_sum(std::size_t predicted) const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
};

ConfusionMatrix confusion(std::span<const DocClass> golds, std::span<const DocClass> preds);

// 2PR/(P+R), or 0 when P+R = 0.
double f1_score(double precision, double recall);

// Empty rows/columns give 0 rather than NaN.
MetricsReport metrics(const ConfusionMatrix& cm);

// Builds a report straight from per-class (P, R, F1) triples, as printed in a
// published table. Support and confusion are left empty.
MetricsReport report_from_scores(std::span<const std::array<double, 3>> rows);

// (candidate.macro_f1 - baseline.macro_f1) / baseline.macro_f1.
double relative_improvement(const MetricsReport& baseline, const MetricsReport& candidate);

// Printed with every improvement figure.
extern const char* const kImprovementNote;

// Fixed-width table in canonical row order with two-decimal values.
std::string render_table(const MetricsReport& report, const std::string& title = {});
std::string report_to_json(const MetricsReport& report);
std::string confusion_to_csv(const ConfusionMatrix& cm);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  // Classes with a single member kept wholly in train.
  std::vector<DocClass> train_only_classes;
};

// Per class, round(n_c * test_ratio) members go to test, picked by a seeded
// shuffle. Singleton classes stay in train. Index lists are ascending.
SplitIndices stratified_split(std::span<const DocClass> labels, double test_ratio,
                              std::uint64_t seed);

template <class T>
std::pair<std::vector<T>, std::vector<T>> stratified_split(std::span<const T> items,
                                                           std::span<const DocClass> labels,
                                                           double test_ratio, std::uint64_t seed) {
  if (items.size() != labels.size()) {
    throw Error(ErrorKind::kLengthMismatch, "stratified_split: items and labels differ in length");
  }
  const SplitIndices idx = stratified_split(labels, test_ratio, seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(idx.train.size());
  out.second.reserve(idx.test.size());
  for (std::size_t i : idx.train) out.first.push_back(items[i]);
  for (std::size_t i : idx.test) out.second.push_back(items[i]);
  return out;
}

}  // namespace evtriage
