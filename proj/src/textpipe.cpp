#include "evtriage/textpipe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "evtriage/error.hpp"

namespace evtriage {

using nlohmann::json;

namespace {

// Sorted; is_stopword() relies on binary search.
constexpr std::array<std::string_view, 127> kStopwords = {
    "a",       "about",   "above",  "after",   "again",  "against", "all",     "also",
    "am",      "an",      "and",    "any",     "are",    "as",      "at",      "be",
    "because", "been",    "before", "being",   "below",  "between", "both",    "but",
    "by",      "can",     "could",  "did",     "do",     "does",    "doing",   "down",
    "during",  "each",    "few",    "for",     "from",   "further", "had",     "has",
    "have",    "having",  "he",     "her",     "here",   "hers",    "herself", "him",
    "himself", "his",     "how",    "however", "i",      "if",      "in",      "into",
    "is",      "it",      "its",    "itself",  "may",    "me",      "might",   "more",
    "most",    "must",    "my",     "myself",  "no",     "nor",     "not",     "of",
    "off",     "on",      "once",   "only",    "or",     "other",   "our",     "ours",
    "out",     "over",    "own",    "same",    "shall",  "she",     "should",  "so",
    "some",    "such",    "than",   "that",    "the",    "their",   "theirs",  "them",
    "then",    "there",   "these",  "they",    "this",   "those",   "through", "thus",
    "to",      "too",     "under",  "until",   "up",     "upon",    "very",    "was",
    "we",      "were",    "what",   "when",    "where",  "which",   "while",   "who",
    "whom",    "why",     "will",   "with",    "within", "would",   "you"};

// Decodes one code point; invalid sequences yield U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

bool is_letter(char32_t c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  if (c == 0xAA || c == 0xB5 || c == 0xBA) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;  // Latin-1, Ext-A/B
  if (c == 0x386 || (c >= 0x388 && c <= 0x3FF)) return c != 0x3F6 && c != 0x38B && c != 0x38D && c != 0x3A2;
  if (c >= 0x400 && c <= 0x4FF) return c < 0x482 || c >= 0x48A;  // Cyrillic letters
  return false;
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 0x25;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 0x3F;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if ((c >= 0x460 && c <= 0x481) || (c >= 0x48A && c <= 0x4BF)) return (c % 2 == 0) ? c + 1 : c;
  return c;
}

void finish_token(std::string& token, std::size_t cp_len, bool all_digits,
                  const TokenizerOptions& opt, TokenList& out) {
  if (!token.empty()) {
    const bool keep = cp_len >= opt.min_token_length &&
                      !(all_digits && cp_len < opt.min_numeric_length) &&
                      !(opt.remove_stopwords && is_stopword(token));
    if (keep) out.push_back(token);
  }
  token.clear();
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::span<const std::string_view> default_stopwords() { return kStopwords; }

bool is_stopword(std::string_view token) {
  return std::binary_search(kStopwords.begin(), kStopwords.end(), token);
}

TokenList tokenize(std::string_view text, const TokenizerOptions& options) {
  std::vector<char32_t> cps;
  cps.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) cps.push_back(to_lower(decode_utf8(text, pos)));

  TokenList out;
  std::string token;
  std::size_t cp_len = 0;
  bool all_digits = true;
  auto alnum = [](char32_t c) { return is_digit(c) || is_letter(c); };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (alnum(c)) {
      encode_utf8(c, token);
      ++cp_len;
      all_digits = all_digits && is_digit(c);
      continue;
    }
    if (c == '-' && options.keep_internal_hyphens && !token.empty() && i + 1 < cps.size() &&
        alnum(cps[i + 1])) {
      token.push_back('-');
      ++cp_len;
      all_digits = false;
      continue;
    }
    finish_token(token, cp_len, all_digits, options, out);
    cp_len = 0;
    all_digits = true;
  }
  finish_token(token, cp_len, all_digits, options, out);
  return out;
}

double SparseVector::at(std::size_t index) const {
  auto it = std::lower_bound(indices.begin(), indices.end(), index);
  if (it == indices.end() || *it != index) return 0.0;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

SparseVector make_sparse(std::span<const double> dense) {
  SparseVector v;
  v.dimension = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      v.indices.push_back(static_cast<std::uint32_t>(i));
      v.values.push_back(dense[i]);
    }
  }
  return v;
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::finalize() {
  index_.clear();
  index_.reserve(tokens_.size());
  idf_.resize(tokens_.size());
  const double n = static_cast<double>(n_documents_);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
    idf_[i] = std::log((n + 1.0) / (static_cast<double>(df_[i]) + 1.0)) + 1.0;
  }
}

std::string Vocabulary::content_hash() const {
  std::string canon = std::to_string(n_documents_) + "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    canon += tokens_[i];
    canon += '\t';
    canon += std::to_string(df_[i]);
    canon += '\n';
  }
  return fnv1a_hex(canon);
}

std::string Vocabulary::to_json() const {
  json triples = json::array();
  for (std::size_t i = 0; i < tokens_.size(); ++i) triples.push_back({tokens_[i], df_[i], i});
  json doc = {{"format_version", kVocabularyFormatVersion},
              {"parameters", {{"min_df", params_.min_df}, {"max_df_ratio", params_.max_df_ratio}}},
              {"n_documents", n_documents_},
              {"tokens", std::move(triples)}};
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format_version").get<int>() != kVocabularyFormatVersion) {
      throw Error(ErrorKind::kFormat, "unsupported vocabulary format_version");
    }
    Vocabulary v;
    v.params_.min_df = doc.at("parameters").at("min_df").get<std::size_t>();
    v.params_.max_df_ratio = doc.at("parameters").at("max_df_ratio").get<double>();
    v.n_documents_ = doc.at("n_documents").get<std::size_t>();
    const auto& triples = doc.at("tokens");
    v.tokens_.resize(triples.size());
    v.df_.resize(triples.size());
    std::vector<bool> seen(triples.size(), false);
    for (const auto& t : triples) {
      const auto idx = t.at(2).get<std::size_t>();
      if (idx >= triples.size() || seen[idx]) {
        throw Error(ErrorKind::kFormat, "vocabulary indices are not a bijection onto 0..V-1");
      }
      seen[idx] = true;
      v.tokens_[idx] = t.at(0).get<std::string>();
      v.df_[idx] = t.at(1).get<std::size_t>();
    }
    v.finalize();
    if (v.index_.size() != v.tokens_.size()) {
      throw Error(ErrorKind::kFormat, "duplicate token in vocabulary");
    }
    return v;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed vocabulary: ") + e.what());
  }
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write vocabulary: " + path);
  out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read vocabulary: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Vocabulary build_vocabulary(std::span<const TokenList> corpus, const VocabularyParams& params) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyInput, "build_vocabulary: empty corpus");
  if (params.min_df < 1) throw Error(ErrorKind::kInvalidArgument, "min_df must be >= 1");
  if (!(params.max_df_ratio > 0.0 && params.max_df_ratio <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "max_df_ratio must be in (0, 1]");
  }

  std::unordered_map<std::string, std::size_t> df;
  std::unordered_set<std::string_view> in_doc;
  for (const TokenList& doc : corpus) {
    in_doc.clear();
    for (const std::string& t : doc) {
      if (in_doc.insert(t).second) ++df[t];
    }
  }

  const double n = static_cast<double>(corpus.size());
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : df) {
    if (count >= params.min_df && static_cast<double>(count) / n <= params.max_df_ratio) {
      kept.emplace_back(token, count);
    }
  }
  if (kept.empty()) {
    throw Error(ErrorKind::kEmptyVocabulary, "no token satisfies the document-frequency bounds");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary v;
  v.n_documents_ = corpus.size();
  v.params_ = params;
  v.tokens_.reserve(kept.size());
  v.df_.reserve(kept.size());
  for (auto& [token, count] : kept) {
    v.tokens_.push_back(std::move(token));
    v.df_.push_back(count);
  }
  v.finalize();
  return v;
}

SparseVector vectorize_counts(const TokenList& tokens, const Vocabulary& vocab) {
  std::vector<std::uint32_t> hits;
  hits.reserve(tokens.size());
  for (const std::string& t : tokens) {
    if (auto idx = vocab.index_of(t)) hits.push_back(*idx);
  }
  std::sort(hits.begin(), hits.end());
  SparseVector v;
  v.dimension = vocab.size();
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    v.indices.push_back(hits[i]);
    v.values.push_back(static_cast<double>(j - i));
    i = j;
  }
  return v;
}

SparseVector tfidf_transform(const SparseVector& counts, const Vocabulary& vocab) {
  if (counts.dimension != vocab.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "tfidf_transform: vector dimension " + std::to_string(counts.dimension) +
                    " != vocabulary size " + std::to_string(vocab.size()));
  }
  SparseVector out;
  out.dimension = counts.dimension;
  out.indices = counts.indices;
  out.values.resize(counts.values.size());
  double sq = 0.0;
  for (std::size_t k = 0; k < counts.indices.size(); ++k) {
    if (counts.indices[k] >= counts.dimension) {
      throw Error(ErrorKind::kDimensionMismatch, "tfidf_transform: index out of range");
    }
    const double w = counts.values[k] * vocab.idf(counts.indices[k]);
    out.values[k] = w;
    sq += w * w;
  }
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (double& w : out.values) w /= norm;
  }
  return out;
}

SparseVector featurize(std::string_view text, const Vocabulary& vocab,
                       const TokenizerOptions& options) {
  return tfidf_transform(vectorize_counts(tokenize(text, options), vocab), vocab);
}

}  // namespace evtriage
