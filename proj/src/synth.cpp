#include "evtriage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "evtriage/error.hpp"
#include "evtriage/rng.hpp"

namespace evtriage {

std::array<std::size_t, kNumClasses> apportion(std::size_t total,
                                               const std::array<std::size_t, kNumClasses>& weights) {
  std::uint64_t wsum = 0;
  for (auto w : weights) wsum += w;
  if (wsum == 0) throw Error(ErrorKind::kInvalidArgument, "apportion: all weights are zero");
  std::array<std::size_t, kNumClasses> out{};
  std::array<std::uint64_t, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    // Exact integer arithmetic: quotient and remainder of total*w/wsum.
    const std::uint64_t num = static_cast<std::uint64_t>(total) * weights[k];
    out[k] = static_cast<std::size_t>(num / wsum);
    remainder[k] = num % wsum;
    assigned += out[k];
  }
  std::array<std::size_t, kNumClasses> order{0, 1, 2, 3, 4};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % kNumClasses]];
  return out;
}

namespace {

constexpr std::string_view kConsonants = "bdfghklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
// Three-letter class tags never produced by the CV syllable generator at the
// same offsets, so class words and shared words cannot collide.
constexpr std::array<std::string_view, kNumClasses> kClassTags = {"bro", "syr", "rav", "nom", "exq"};

std::string syllable(SplitMix64& rng) {
  std::string s;
  s.push_back(kConsonants[rng.bounded(kConsonants.size())]);
  s.push_back(kVowels[rng.bounded(kVowels.size())]);
  return s;
}

DocClass sibling(DocClass c) {
  switch (c) {
    case DocClass::kBroadSynthesis: return DocClass::kSystematicReview;
    case DocClass::kSystematicReview: return DocClass::kBroadSynthesis;
    case DocClass::kPrimaryRct: return DocClass::kPrimaryNonRct;
    case DocClass::kPrimaryNonRct: return DocClass::kPrimaryRct;
    case DocClass::kExcluded: return DocClass::kExcluded;
  }
  return c;
}

double standard_normal(SplitMix64& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace

std::vector<std::string> synthetic_vocabulary(std::optional<DocClass> cls, std::size_t size,
                                              std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, cls ? index_of(*cls) + 1 : 0));
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  while (words.size() < size) {
    std::string w = cls ? std::string(kClassTags[index_of(*cls)]) : syllable(rng);
    w += syllable(rng);
    w += syllable(rng);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::vector<DocumentRecord> generate_corpus(const SynthOptions& options) {
  const auto counts = apportion(options.n_documents, options.class_weights);
  std::vector<DocClass> labels;
  labels.reserve(options.n_documents);
  for (std::size_t k = 0; k < kNumClasses; ++k) labels.insert(labels.end(), counts[k], class_at(k));

  SplitMix64 rng(derive_seed(options.seed, 1000));
  seeded_shuffle(labels.begin(), labels.end(), rng);

  std::array<std::vector<std::string>, kNumClasses> class_vocab;
  for (DocClass c : kAllClasses) {
    class_vocab[index_of(c)] = synthetic_vocabulary(c, options.class_vocabulary_size, options.seed);
  }
  const auto common = synthetic_vocabulary(std::nullopt, options.common_vocabulary_size, options.seed);
  constexpr std::array<std::string_view, 6> kFiller = {"the", "of", "and", "in", "with", "for"};
  constexpr std::array<Source, 4> kSources = {Source::kPubmed, Source::kEmbase, Source::kMedrxiv,
                                              Source::kBiorxiv};

  auto class_token = [&](DocClass c) -> const std::string& {
    const DocClass from = rng.uniform() < options.sibling_leak ? sibling(c) : c;
    const auto& v = class_vocab[index_of(from)];
    return v[rng.bounded(v.size())];
  };
  auto common_token = [&]() -> const std::string& { return common[rng.bounded(common.size())]; };

  std::vector<DocumentRecord> docs;
  docs.reserve(labels.size());
  char id[64];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const DocClass c = labels[i];
    std::vector<std::string> title_words{class_token(c), common_token(), class_token(c),
                                         std::string(kFiller[rng.bounded(kFiller.size())]),
                                         common_token()};
    std::vector<std::string> words;
    for (std::size_t k = 0; k < options.class_tokens_per_doc; ++k) words.push_back(class_token(c));
    for (std::size_t k = 0; k < options.common_tokens_per_doc; ++k) words.push_back(common_token());
    for (std::size_t k = 0; k < 4; ++k) words.emplace_back(kFiller[rng.bounded(kFiller.size())]);
    words.push_back(std::to_string(10 + rng.bounded(990)));
    seeded_shuffle(words.begin(), words.end(), rng);

    DocumentRecord rec;
    std::snprintf(id, sizeof id, "%s-%06zu", options.id_prefix.c_str(), i + 1);
    rec.id = id;
    for (std::size_t k = 0; k < title_words.size(); ++k) {
      if (k) rec.title += ' ';
      rec.title += title_words[k];
    }
    rec.title[0] = static_cast<char>(rec.title[0] - 'a' + 'A');
    for (std::size_t k = 0; k < words.size(); ++k) {
      rec.abstract_text += words[k];
      rec.abstract_text += (k + 1) % 12 == 0 ? ". " : " ";
    }
    rec.abstract_text.back() = '.';
    rec.source = kSources[rng.bounded(kSources.size())];
    rec.label = c;
    docs.push_back(std::move(rec));
  }
  return docs;
}

std::vector<LabeledSparse> generate_skewed_numeric(std::size_t n, double minority_fraction,
                                                   DocClass majority, DocClass minority,
                                                   double separation, std::size_t n_features,
                                                   std::uint64_t seed) {
  if (n_features < 1) throw Error(ErrorKind::kInvalidArgument, "need at least one feature");
  const auto n_minor = static_cast<std::size_t>(std::llround(static_cast<double>(n) * minority_fraction));
  std::vector<DocClass> labels(n, majority);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(std::min(n_minor, n)), minority);
  SplitMix64 rng(seed);
  seeded_shuffle(labels.begin(), labels.end(), rng);

  std::vector<LabeledSparse> out;
  out.reserve(n);
  std::vector<double> dense(n_features);
  for (DocClass c : labels) {
    dense[0] = standard_normal(rng) + (c == minority ? separation : 0.0);
    for (std::size_t f = 1; f < n_features; ++f) dense[f] = standard_normal(rng);
    out.push_back({make_sparse(dense), c});
  }
  return out;
}

}  // namespace evtriage
