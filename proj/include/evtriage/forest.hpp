#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtriage/doc_class.hpp"
#include "evtriage/prediction.hpp"
#include "evtriage/textpipe.hpp"

namespace evtriage {

using ClassCounts = std::array<std::uint32_t, kNumClasses>;

// Flat node; children are indices into Tree::nodes. Nodes are stored in
// preorder (node, left subtree, right subtree), root at 0.
struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // x <= threshold goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  ClassCounts counts{};  // leaves only

  bool is_leaf() const { return feature == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  std::size_t depth() const;
  const TreeNode& leaf_for(const SparseVector& x) const;
  bool operator==(const Tree&) const = default;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_samples_leaf = 2;
  // 0 selects ceil(sqrt(V)).
  std::size_t features_per_split = 0;
  std::uint64_t seed = 42;
  // Unset means inverse frequency over the training set.
  std::optional<ClassVector> class_weights;
  // Worker threads for tree construction; results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

// w_c = N / (5 n_c). Classes absent from the counts get weight 1.
ClassVector inverse_frequency_weights(std::span<const std::size_t> class_counts);
ClassVector inverse_frequency_weights(std::span<const DocClass> labels);
ClassVector uniform_weights();

// 1 - sum (c_k / sum c)^2. Throws ErrorKind::kEmptyNode when the sum is 0.
double gini(const ClassVector& class_weight_sums);

struct WeightedSample {
  const SparseVector* x = nullptr;
  DocClass label = DocClass::kBroadSynthesis;
  double weight = 1.0;
};

struct Split {
  std::uint32_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

// Decreases closer than this are treated as ties and go to the lower
// (feature, threshold).
inline constexpr double kSplitTieTolerance = 1e-12;

// Best weighted-Gini split over the candidate features, trying midpoints
// between consecutive distinct values. Returns nullopt when nothing
// decreases impurity. min_child_weight_count, when > 0, rejects splits that
// leave fewer than that many sample units (sum of the given multiplicities)
// on either side.
std::optional<Split> best_split(std::span<const WeightedSample> samples,
                                std::span<const std::uint32_t> candidate_features,
                                std::span<const std::uint32_t> multiplicities = {},
                                std::size_t min_samples_leaf = 1);

struct LabeledSparse {
  SparseVector x;
  DocClass label;
};

inline constexpr int kForestFormatVersion = 1;

class ForestModel {
 public:
  const ForestParams& params() const { return params_; }
  const ClassVector& class_weights() const { return class_weights_; }
  std::size_t dimension() const { return dimension_; }
  const std::string& vocabulary_hash() const { return vocabulary_hash_; }
  const std::vector<Tree>& trees() const { return trees_; }

  std::string to_json() const;
  static ForestModel from_json(std::string_view text);
  void save(const std::string& path) const;
  // Throws ErrorKind::kVocabularyMismatch when the stored hash differs from
  // the supplied vocabulary.
  static ForestModel load(const std::string& path, const Vocabulary& vocab);

  bool operator==(const ForestModel& o) const {
    return trees_ == o.trees_ && dimension_ == o.dimension_ &&
           class_weights_ == o.class_weights_ && vocabulary_hash_ == o.vocabulary_hash_;
  }

  // Builds a model from prepared trees (tests, hand-made fixtures).
  static ForestModel from_trees(std::vector<Tree> trees, std::size_t dimension,
                                ClassVector class_weights, ForestParams params = {},
                                std::string vocabulary_hash = {});

 private:
  friend ForestModel train_forest(std::span<const LabeledSparse>, const ForestParams&,
                                  std::string);
  void validate() const;

  ForestParams params_;
  ClassVector class_weights_{};
  std::size_t dimension_ = 0;
  std::string vocabulary_hash_;
  std::vector<Tree> trees_;
};

// Tree t trains on a bootstrap drawn from derive_seed(params.seed, t); the
// same stream samples candidate features at every node.
ForestModel train_forest(std::span<const LabeledSparse> dataset, const ForestParams& params,
                         std::string vocabulary_hash = {});

// Soft voting: mean over trees of the class-weighted leaf distribution.
PredictionResult predict_forest(const ForestModel& model, const SparseVector& x);

}  // namespace evtriage
