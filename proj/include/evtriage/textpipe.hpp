#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace evtriage {

using TokenList = std::vector<std::string>;

struct TokenizerOptions {
  std::size_t min_token_length = 2;
  std::size_t min_numeric_length = 2;
  bool keep_internal_hyphens = true;
  bool remove_stopwords = true;
};

// The built-in English stopword list, sorted.
std::span<const std::string_view> default_stopwords();
bool is_stopword(std::string_view token);

// Token grammar: lowercase, then maximal runs of letters/digits; a hyphen is
// kept when both neighbours are alphanumeric ("covid-19", "double-blind").
// Stopwords, tokens shorter than min_token_length and pure-digit tokens
// shorter than min_numeric_length are dropped.
//
// Letters are ASCII plus Latin-1/Latin Extended-A, Greek and Cyrillic; other
// code points act as separators. Lowercasing of those blocks is done with
// fixed tables so output never depends on the process locale.
TokenList tokenize(std::string_view text, const TokenizerOptions& options = {});

struct SparseVector {
  std::vector<std::uint32_t> indices;  // strictly ascending
  std::vector<double> values;          // finite, non-zero
  std::size_t dimension = 0;

  std::size_t nnz() const { return indices.size(); }
  // Absent coordinates read as 0.0.
  double at(std::size_t index) const;
  bool operator==(const SparseVector&) const = default;
};

SparseVector make_sparse(std::span<const double> dense);

struct VocabularyParams {
  std::size_t min_df = 2;
  double max_df_ratio = 0.9;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const { return tokens_.size(); }
  std::size_t n_documents() const { return n_documents_; }
  const VocabularyParams& params() const { return params_; }

  std::optional<std::uint32_t> index_of(std::string_view token) const;
  const std::string& token_at(std::size_t index) const { return tokens_.at(index); }
  std::size_t document_frequency(std::size_t index) const { return df_.at(index); }
  double idf(std::size_t index) const { return idf_.at(index); }

  // FNV-1a over the serialized content; models record it to detect a
  // mismatched vocabulary at load time.
  std::string content_hash() const;

  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& o) const {
    return tokens_ == o.tokens_ && df_ == o.df_ && n_documents_ == o.n_documents_;
  }

 private:
  friend Vocabulary build_vocabulary(std::span<const TokenList>, const VocabularyParams&);
  void finalize();

  std::vector<std::string> tokens_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t n_documents_ = 0;
  VocabularyParams params_;
};

inline constexpr int kVocabularyFormatVersion = 1;

// Keeps tokens with min_df <= df and df / n_documents <= max_df_ratio.
// Indices go by descending df, ties lexicographic.
Vocabulary build_vocabulary(std::span<const TokenList> corpus,
                            const VocabularyParams& params = {});

SparseVector vectorize_counts(const TokenList& tokens, const Vocabulary& vocab);

// tf * (ln((n+1)/(df+1)) + 1), then L2-normalized.
SparseVector tfidf_transform(const SparseVector& counts, const Vocabulary& vocab);

// tokenize -> counts -> tfidf.
SparseVector featurize(std::string_view text, const Vocabulary& vocab,
                       const TokenizerOptions& options = {});

}  // namespace evtriage
