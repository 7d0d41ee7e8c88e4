#include "evtriage/embed.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "evtriage/error.hpp"
#include "evtriage/kernels.hpp"
#include "evtriage/rng.hpp"
#include "evtriage/textpipe.hpp"

namespace evtriage {

using nlohmann::json;

void ProviderConfig::validate() const {
  if (dimension < 1) throw Error(ErrorKind::kInvalidArgument, "embedding dimension must be >= 1");
  if (max_batch < 1) throw Error(ErrorKind::kInvalidArgument, "max_batch must be >= 1");
  if (max_attempts < 1) throw Error(ErrorKind::kInvalidArgument, "max_attempts must be >= 1");
  if (mode == ProviderMode::kRemote && endpoint.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "remote provider needs an endpoint");
  }
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

DenseEmbedding embed_stub(std::string_view text, std::size_t dimension, std::uint64_t seed) {
  if (dimension < 1) throw Error(ErrorKind::kInvalidArgument, "embed_stub: dimension must be >= 1");
  DenseEmbedding sum(dimension, 0.0);
  const TokenList tokens = tokenize(text);
  if (tokens.empty()) {
    sum[0] = 1.0;
    return sum;
  }
  const std::uint64_t seed_mix = mix64(seed);
  std::vector<double> v(dimension);
  for (const std::string& token : tokens) {
    SplitMix64 rng(fnv1a64(token) ^ seed_mix);
    for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
    const double norm = std::sqrt(kernels::scalar::sum_squares(v.data(), dimension));
    kernels::scalar::axpy(1.0 / norm, v.data(), sum.data(), dimension);
  }
  const double norm = std::sqrt(kernels::scalar::sum_squares(sum.data(), dimension));
  if (!(norm > 0.0)) {
    std::fill(sum.begin(), sum.end(), 0.0);
    sum[0] = 1.0;
    return sum;
  }
  for (double& x : sum) x /= norm;
  return sum;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(kernels::sum_squares(a));
  const double nb = std::sqrt(kernels::sum_squares(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return kernels::dot(a, b) / (na * nb);
}

std::vector<DenseEmbedding> StubProvider::embed(std::span<const std::string> texts) {
  std::vector<DenseEmbedding> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(embed_stub(t, dimension_, seed_));
  return out;
}

std::string StubProvider::identity() const { return "stub/v1/seed=" + std::to_string(seed_); }

RemoteProvider::RemoteProvider(ProviderConfig config) : config_(std::move(config)) {
  config_.validate();
}

std::string RemoteProvider::identity() const { return "remote/" + config_.endpoint; }

std::vector<DenseEmbedding> RemoteProvider::embed(std::span<const std::string> texts) {
  std::vector<DenseEmbedding> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += config_.max_batch) {
    const std::size_t n = std::min(config_.max_batch, texts.size() - i);
    auto chunk = embed_batch(texts.subspan(i, n));
    for (auto& e : chunk) out.push_back(std::move(e));
  }
  return out;
}

namespace {

// "http://host:port/prefix" -> ("http://host:port", "/prefix")
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = endpoint.find('/', start);
  if (slash == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, slash), prefix};
}

}  // namespace

std::vector<DenseEmbedding> RemoteProvider::embed_batch(std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  if (texts.size() > config_.max_batch) {
    throw Error(ErrorKind::kInvalidArgument, "embed_batch: batch larger than max_batch");
  }
  const auto [host, prefix] = split_endpoint(config_.endpoint);
  json body = {{"texts", json::array()}};
  for (const std::string& t : texts) body["texts"].push_back(t);
  const std::string payload = body.dump(-1, ' ', false, json::error_handler_t::replace);

  httplib::Client client(host);
  const auto timeout_us =
      std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout).count();
  client.set_connection_timeout(timeout_us / 1000000, timeout_us % 1000000);
  client.set_read_timeout(timeout_us / 1000000, timeout_us % 1000000);
  client.set_write_timeout(timeout_us / 1000000, timeout_us % 1000000);

  std::string last_failure;
  bool timed_out = false;
  auto backoff = config_.initial_backoff;
  for (std::size_t attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(prefix + "/embed", payload, "application/json");
    if (!res) {
      timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout;
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      timed_out = false;
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorKind::kTransport,
                  "embedding service rejected the request: HTTP " + std::to_string(res->status));
    }

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("embeddings") || !reply["embeddings"].is_array()) {
      throw Error(ErrorKind::kTransport, "embedding service returned a malformed body");
    }
    const json& rows = reply["embeddings"];
    if (rows.size() != texts.size()) {
      throw Error(ErrorKind::kTransport, "embedding service returned " +
                                             std::to_string(rows.size()) + " vectors for " +
                                             std::to_string(texts.size()) + " texts");
    }
    if (reply.contains("dimension") && reply["dimension"].is_number_integer() &&
        reply["dimension"].get<std::size_t>() != config_.dimension) {
      throw Error(ErrorKind::kBadDimension,
                  "embedding service reports dimension " + reply["dimension"].dump() +
                      ", expected " + std::to_string(config_.dimension));
    }
    std::vector<DenseEmbedding> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const json& row = rows[i];
      if (!row.is_array() || row.size() != config_.dimension) {
        throw Error(ErrorKind::kBadDimension,
                    "embedding for item " + std::to_string(i) + " has " +
                        std::to_string(row.is_array() ? row.size() : 0) + " values, expected " +
                        std::to_string(config_.dimension));
      }
      DenseEmbedding e;
      e.reserve(row.size());
      for (const json& v : row) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          throw Error(ErrorKind::kNonFiniteValue,
                      "embedding for item " + std::to_string(i) + " has a non-finite value");
        }
        e.push_back(v.get<double>());
      }
      out.push_back(std::move(e));
    }
    return out;
  }
  throw Error(timed_out ? ErrorKind::kTimeout : ErrorKind::kTransport,
              "embedding service unavailable after " + std::to_string(config_.max_attempts) +
                  " attempts: " + last_failure);
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  config.validate();
  if (config.mode == ProviderMode::kRemote) return std::make_unique<RemoteProvider>(config);
  return std::make_unique<StubProvider>(config.dimension, config.stub_seed);
}

std::string embedding_cache_key(std::string_view provider_identity, std::size_t dimension,
                                std::string_view text) {
  std::string material(provider_identity);
  material.push_back('\0');
  material += std::to_string(dimension);
  material.push_back('\0');
  material += text;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kInvalidArgument, "SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("key") || !j.contains("vector")) {
      throw Error(ErrorKind::kFormat,
                  "embedding cache " + path_ + ": bad record on line " + std::to_string(line_no));
    }
    entries_[j["key"].get<std::string>()] = j["vector"].get<DenseEmbedding>();
  }
}

std::optional<DenseEmbedding> EmbeddingCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& key, DenseEmbedding vector) {
  std::lock_guard lock(mu_);
  entries_[key] = std::move(vector);
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void EmbeddingCache::flush() const {
  if (path_.empty()) return;
  std::lock_guard lock(mu_);
  std::vector<const std::string*> keys;
  keys.reserve(entries_.size());
  for (const auto& [k, v] : entries_) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });

  const std::string tmp = path_ + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write embedding cache: " + tmp);
    for (const std::string* k : keys) {
      out << json{{"key", *k}, {"vector", entries_.at(*k)}}.dump() << '\n';
    }
    if (!out.flush()) throw Error(ErrorKind::kIo, "short write to embedding cache: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot replace embedding cache: " + ec.message());
}

std::vector<DenseEmbedding> CachingProvider::embed(std::span<const std::string> texts) {
  std::vector<DenseEmbedding> out(texts.size());
  std::vector<std::string> keys(texts.size());
  std::vector<std::string> misses;
  std::vector<std::size_t> miss_pos;
  const std::string id = inner_->identity();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = embedding_cache_key(id, inner_->dimension(), texts[i]);
    if (auto hit = cache_->get(keys[i])) {
      out[i] = std::move(*hit);
    } else {
      misses.push_back(texts[i]);
      miss_pos.push_back(i);
    }
  }
  if (!misses.empty()) {
    auto fresh = inner_->embed(misses);
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      cache_->put(keys[miss_pos[j]], fresh[j]);
      out[miss_pos[j]] = std::move(fresh[j]);
    }
  }
  return out;
}

}  // namespace evtriage
