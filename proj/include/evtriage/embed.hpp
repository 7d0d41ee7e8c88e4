#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evtriage {

using DenseEmbedding = std::vector<double>;

inline constexpr std::size_t kDefaultEmbeddingDimension = 256;

enum class ProviderMode { kStub, kRemote };

struct ProviderConfig {
  ProviderMode mode = ProviderMode::kStub;
  std::string endpoint;  // e.g. "http://127.0.0.1:8900"
  std::size_t dimension = kDefaultEmbeddingDimension;
  std::uint64_t stub_seed = 7;
  std::chrono::milliseconds timeout{5000};
  std::size_t max_batch = 64;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{50};

  void validate() const;
};

// Deterministic stand-in for a language-model encoder. Each token of
// tokenize(text) maps to a unit vector drawn from SplitMix64 seeded with
// fnv1a64(token) ^ mix64(seed); values are uniform in [-1, 1) before
// normalization. The embedding is the normalized sum (repeated tokens count
// repeatedly). Empty token lists map to e_0 = (1, 0, ..., 0).
// Only the scalar reference kernels are used here so vectors are identical on
// every platform.
DenseEmbedding embed_stub(std::string_view text, std::size_t dimension, std::uint64_t seed);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Results are in input order.
  virtual std::vector<DenseEmbedding> embed(std::span<const std::string> texts) = 0;
  virtual std::size_t dimension() const = 0;
  // Stable string identifying the model behind the provider; part of cache keys.
  virtual std::string identity() const = 0;
};

class StubProvider final : public EmbeddingProvider {
 public:
  StubProvider(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {}

  std::vector<DenseEmbedding> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  std::string identity() const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// POST {endpoint}/embed with {"texts": [...]}; expects
// {"embeddings": [[...], ...], "dimension": d}. Transport failures and 5xx
// are retried with exponential backoff up to max_attempts.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(ProviderConfig config);

  // Splits into max_batch chunks; one request per chunk.
  std::vector<DenseEmbedding> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return config_.dimension; }
  std::string identity() const override;

  // A single request; texts.size() must be <= max_batch.
  std::vector<DenseEmbedding> embed_batch(std::span<const std::string> texts) const;

 private:
  ProviderConfig config_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

// Hex SHA-256 of (identity, dimension, text), the cache key.
std::string embedding_cache_key(std::string_view provider_identity, std::size_t dimension,
                                std::string_view text);

// Line-delimited cache file, one {"key": ..., "vector": [...]} per line.
// flush() rewrites the whole file through a temp file and rename.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::string path);

  std::optional<DenseEmbedding> get(const std::string& key) const;
  void put(const std::string& key, DenseEmbedding vector);
  std::size_t size() const;
  void flush() const;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, DenseEmbedding> entries_;
};

class CachingProvider final : public EmbeddingProvider {
 public:
  CachingProvider(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<EmbeddingCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  std::vector<DenseEmbedding> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return inner_->dimension(); }
  std::string identity() const override { return inner_->identity(); }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace evtriage
