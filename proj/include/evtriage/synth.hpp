#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evtriage/doc_class.hpp"
#include "evtriage/forest.hpp"
#include "evtriage/ingest.hpp"

namespace evtriage {

// Per-class document counts of the reference curation corpus, canonical order.
inline constexpr std::array<std::size_t, kNumClasses> kReferenceClassCounts = {
    17324, 286050, 56623, 35644, 6096};

// Largest-remainder apportionment of `total` over `weights`; ties go to the
// lower class index. Sums to `total` exactly.
std::array<std::size_t, kNumClasses> apportion(std::size_t total,
                                               const std::array<std::size_t, kNumClasses>& weights);

struct SynthOptions {
  std::size_t n_documents = 5000;
  std::array<std::size_t, kNumClasses> class_weights = kReferenceClassCounts;
  std::uint64_t seed = 2020;
  std::size_t class_vocabulary_size = 40;
  std::size_t common_vocabulary_size = 300;
  std::size_t class_tokens_per_doc = 12;
  std::size_t common_tokens_per_doc = 30;
  // Probability that a class token is borrowed from the sibling class
  // (broad synthesis <-> systematic review, rct <-> non-rct).
  double sibling_leak = 0.15;
  std::string id_prefix = "syn";
};

// Deterministic pseudo-word vocabulary for one class (or the shared pool when
// cls is nullopt). Words are lowercase, alphabetic and never stopwords.
std::vector<std::string> synthetic_vocabulary(std::optional<DocClass> cls, std::size_t size,
                                              std::uint64_t seed);

// Labeled abstracts with class-specific vocabularies, interleaved in a seeded
// order. Class counts follow apportion(n_documents, class_weights).
std::vector<DocumentRecord> generate_corpus(const SynthOptions& options);

// Two-class numeric set: `n` samples, a `minority_fraction` of them labeled
// `minority`, the rest `majority`. Feature 0 is N(0,1) for the majority and
// N(separation,1) for the minority; the remaining features are noise.
std::vector<LabeledSparse> generate_skewed_numeric(std::size_t n, double minority_fraction,
                                                   DocClass majority, DocClass minority,
                                                   double separation, std::size_t n_features,
                                                   std::uint64_t seed);

}  // namespace evtriage
