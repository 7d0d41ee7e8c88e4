#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "evtriage/embed.hpp"
#include "evtriage/error.hpp"
#include "evtriage/forest.hpp"
#include "evtriage/ingest.hpp"
#include "evtriage/triage.hpp"

namespace evtriage::testing {

inline ForestBundle single_leaf_bundle(ClassCounts counts) {
  const Vocabulary vocab =
      build_vocabulary(std::vector<TokenList>{{"trial", "review"}, {"trial"}}, {1, 1.0});
  TreeNode leaf;
  leaf.counts = counts;
  ForestModel model = ForestModel::from_trees({Tree{{leaf}}}, vocab.size(), uniform_weights(), {},
                                              vocab.content_hash());
  return {vocab, std::move(model)};
}

inline DocumentRecord record(std::string id, std::string title, std::string abstract_text,
                             std::optional<DocClass> label = std::nullopt) {
  DocumentRecord r;
  r.id = std::move(id);
  r.title = std::move(title);
  r.abstract_text = std::move(abstract_text);
  r.label = label;
  return r;
}

// Stub embeddings that can be switched to fail like an unreachable service.
class FlakyProvider final : public EmbeddingProvider {
 public:
  FlakyProvider(std::size_t dimension, std::uint64_t seed) : inner_(dimension, seed) {}

  std::vector<DenseEmbedding> embed(std::span<const std::string> texts) override {
    if (failing) throw Error(ErrorKind::kTransport, "provider offline");
    return inner_.embed(texts);
  }
  std::size_t dimension() const override { return inner_.dimension(); }
  std::string identity() const override { return inner_.identity(); }

  std::atomic<bool> failing{false};

 private:
  StubProvider inner_;
};

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("evtriage_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string str() const { return path_.string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace evtriage::testing
