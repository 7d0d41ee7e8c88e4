#include "evtriage/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "evtriage/error.hpp"
#include "evtriage/rng.hpp"

namespace evtriage {

using nlohmann::json;

void ForestParams::validate() const {
  if (n_trees < 1) throw Error(ErrorKind::kInvalidArgument, "n_trees must be >= 1");
  if (max_depth < 1) throw Error(ErrorKind::kInvalidArgument, "max_depth must be >= 1");
  if (min_samples_leaf < 1) throw Error(ErrorKind::kInvalidArgument, "min_samples_leaf must be >= 1");
  if (class_weights) {
    for (double w : *class_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error(ErrorKind::kInvalidArgument, "class weights must be finite and > 0");
      }
    }
  }
}

ClassVector inverse_frequency_weights(std::span<const std::size_t> class_counts) {
  if (class_counts.size() != kNumClasses) {
    throw Error(ErrorKind::kInvalidArgument, "inverse_frequency_weights: expected 5 counts");
  }
  double total = 0.0;
  for (std::size_t c : class_counts) total += static_cast<double>(c);
  ClassVector w;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    w[k] = class_counts[k] == 0
               ? 1.0
               : total / (static_cast<double>(kNumClasses) * static_cast<double>(class_counts[k]));
  }
  return w;
}

ClassVector inverse_frequency_weights(std::span<const DocClass> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (DocClass c : labels) ++counts[index_of(c)];
  return inverse_frequency_weights(counts);
}

ClassVector uniform_weights() {
  ClassVector w;
  w.fill(1.0);
  return w;
}

double gini(const ClassVector& sums) {
  double total = 0.0;
  for (double s : sums) {
    if (s < 0.0) throw Error(ErrorKind::kInvalidArgument, "gini: negative class count");
    total += s;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::kEmptyNode, "gini: empty node");
  double sq = 0.0;
  for (double s : sums) {
    const double p = s / total;
    sq += p * p;
  }
  return 1.0 - sq;
}

namespace {

double sum_of(const ClassVector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Gini without the empty-node check; callers guarantee total > 0.
double gini_unchecked(const ClassVector& sums, double total) {
  double sq = 0.0;
  for (double s : sums) {
    const double p = s / total;
    sq += p * p;
  }
  return 1.0 - sq;
}

double midpoint(double a, double b) {
  const double m = 0.5 * (a + b);
  return m < b ? m : a;
}

struct ValueGroup {
  double value;
  ClassVector sums{};
  std::size_t units = 0;
};

}  // namespace

std::optional<Split> best_split(std::span<const WeightedSample> samples,
                                std::span<const std::uint32_t> candidate_features,
                                std::span<const std::uint32_t> multiplicities,
                                std::size_t min_samples_leaf) {
  if (samples.empty()) throw Error(ErrorKind::kEmptyInput, "best_split: no samples");
  if (!multiplicities.empty() && multiplicities.size() != samples.size()) {
    throw Error(ErrorKind::kLengthMismatch, "best_split: multiplicities length mismatch");
  }
  auto mult = [&](std::size_t i) -> std::uint32_t {
    return multiplicities.empty() ? 1u : multiplicities[i];
  };

  ClassVector parent{};
  std::size_t parent_units = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    parent[index_of(samples[i].label)] += samples[i].weight * mult(i);
    parent_units += mult(i);
  }
  const double parent_total = sum_of(parent);
  if (!(parent_total > 0.0)) return std::nullopt;
  const double parent_gini = gini_unchecked(parent, parent_total);
  if (parent_gini <= kSplitTieTolerance) return std::nullopt;

  std::vector<std::uint32_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());

  std::optional<Split> best;
  std::vector<std::pair<double, std::size_t>> nonzero;
  std::vector<ValueGroup> groups;
  for (std::uint32_t f : features) {
    // Absent coordinates are 0.0: aggregate them into one group and sort only
    // the explicit entries.
    nonzero.clear();
    ValueGroup zero{0.0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double v = samples[i].x->at(f);
      if (v != 0.0) {
        nonzero.emplace_back(v, i);
      } else {
        zero.sums[index_of(samples[i].label)] += samples[i].weight * mult(i);
        zero.units += mult(i);
      }
    }
    if (nonzero.empty()) continue;
    std::sort(nonzero.begin(), nonzero.end());

    groups.clear();
    bool zero_placed = zero.units == 0;
    for (const auto& [v, i] : nonzero) {
      if (!zero_placed && v > 0.0) {
        groups.push_back(zero);
        zero_placed = true;
      }
      if (groups.empty() || groups.back().value != v) groups.push_back(ValueGroup{v});
      groups.back().sums[index_of(samples[i].label)] += samples[i].weight * mult(i);
      groups.back().units += mult(i);
    }
    if (!zero_placed) groups.push_back(zero);
    if (groups.size() < 2) continue;

    ClassVector left{};
    std::size_t left_units = 0;
    for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
      for (std::size_t k = 0; k < kNumClasses; ++k) left[k] += groups[g].sums[k];
      left_units += groups[g].units;
      const std::size_t right_units = parent_units - left_units;
      if (left_units < min_samples_leaf || right_units < min_samples_leaf) continue;

      ClassVector right;
      for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = parent[k] - left[k];
      const double wl = sum_of(left);
      const double wr = parent_total - wl;
      if (!(wl > 0.0) || !(wr > 0.0)) continue;
      const double decrease = parent_gini - (wl / parent_total) * gini_unchecked(left, wl) -
                              (wr / parent_total) * gini_unchecked(right, wr);
      if (!best || decrease > best->impurity_decrease + kSplitTieTolerance) {
        best = Split{f, midpoint(groups[g].value, groups[g + 1].value), decrease};
      }
    }
  }
  if (best && best->impurity_decrease > kSplitTieTolerance) return best;
  return std::nullopt;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t max_depth = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes[i];
    if (n.is_leaf()) {
      max_depth = std::max(max_depth, d);
    } else {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return max_depth;
}

const TreeNode& Tree::leaf_for(const SparseVector& x) const {
  const TreeNode* n = &nodes[0];
  while (!n->is_leaf()) {
    n = &nodes[x.at(static_cast<std::size_t>(n->feature)) <= n->threshold ? n->left : n->right];
  }
  return *n;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const LabeledSparse> data, const ForestParams& params,
              const ClassVector& class_weights, std::size_t features_per_split,
              std::uint64_t seed)
      : data_(data),
        params_(params),
        class_weights_(class_weights),
        k_(features_per_split),
        rng_(seed),
        mult_(data.size(), 0) {
    feature_pool_.resize(data.empty() ? 0 : data[0].x.dimension);
    for (std::size_t i = 0; i < feature_pool_.size(); ++i) {
      feature_pool_[i] = static_cast<std::uint32_t>(i);
    }
  }

  Tree build() {
    const std::size_t n = data_.size();
    for (std::size_t draw = 0; draw < n; ++draw) ++mult_[rng_.bounded(n)];
    std::vector<std::uint32_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (mult_[i] > 0) idx.push_back(static_cast<std::uint32_t>(i));
    }
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  std::uint32_t make_leaf(const ClassCounts& counts) {
    TreeNode leaf;
    leaf.counts = counts;
    tree_.nodes.push_back(leaf);
    return static_cast<std::uint32_t>(tree_.nodes.size() - 1);
  }

  std::uint32_t grow(const std::vector<std::uint32_t>& idx, std::size_t depth) {
    ClassCounts counts{};
    std::size_t units = 0;
    for (std::uint32_t i : idx) {
      counts[index_of(data_[i].label)] += mult_[i];
      units += mult_[i];
    }
    const auto classes_present =
        std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; });
    if (depth >= params_.max_depth || classes_present <= 1 ||
        units < 2 * params_.min_samples_leaf || feature_pool_.empty()) {
      return make_leaf(counts);
    }

    // Partial Fisher-Yates: the first k_ pool entries become the candidates.
    const std::size_t v = feature_pool_.size();
    for (std::size_t j = 0; j < k_; ++j) {
      const std::size_t r = j + static_cast<std::size_t>(rng_.bounded(v - j));
      std::swap(feature_pool_[j], feature_pool_[r]);
    }
    std::span<const std::uint32_t> candidates(feature_pool_.data(), k_);

    samples_.clear();
    sample_mult_.clear();
    for (std::uint32_t i : idx) {
      samples_.push_back({&data_[i].x, data_[i].label, class_weights_[index_of(data_[i].label)]});
      sample_mult_.push_back(mult_[i]);
    }
    const auto split = best_split(samples_, candidates, sample_mult_, params_.min_samples_leaf);
    if (!split) return make_leaf(counts);

    std::vector<std::uint32_t> left_idx, right_idx;
    for (std::uint32_t i : idx) {
      (data_[i].x.at(split->feature) <= split->threshold ? left_idx : right_idx).push_back(i);
    }
    TreeNode node;
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    tree_.nodes.push_back(node);
    const auto self = static_cast<std::uint32_t>(tree_.nodes.size() - 1);
    const std::uint32_t left = grow(left_idx, depth + 1);
    const std::uint32_t right = grow(right_idx, depth + 1);
    tree_.nodes[self].left = left;
    tree_.nodes[self].right = right;
    return self;
  }

  std::span<const LabeledSparse> data_;
  const ForestParams& params_;
  const ClassVector& class_weights_;
  std::size_t k_;
  SplitMix64 rng_;
  std::vector<std::uint32_t> mult_;
  std::vector<std::uint32_t> feature_pool_;
  std::vector<WeightedSample> samples_;
  std::vector<std::uint32_t> sample_mult_;
  Tree tree_;
};

std::size_t resolve_features_per_split(const ForestParams& params, std::size_t dimension) {
  if (dimension == 0) return 0;
  std::size_t k = params.features_per_split;
  if (k == 0) k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dimension))));
  return std::clamp<std::size_t>(k, 1, dimension);
}

}  // namespace

ForestModel train_forest(std::span<const LabeledSparse> dataset, const ForestParams& params,
                         std::string vocabulary_hash) {
  params.validate();
  if (dataset.empty()) throw Error(ErrorKind::kEmptyInput, "train_forest: empty dataset");
  const std::size_t dim = dataset[0].x.dimension;
  std::vector<DocClass> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (s.x.dimension != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "train_forest: vectors differ in dimension");
    }
    labels.push_back(s.label);
  }

  ForestModel model;
  model.params_ = params;
  model.params_.features_per_split = resolve_features_per_split(params, dim);
  model.class_weights_ = params.class_weights.value_or(inverse_frequency_weights(labels));
  model.dimension_ = dim;
  model.vocabulary_hash_ = std::move(vocabulary_hash);
  model.trees_.resize(params.n_trees);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < params.n_trees; t = next++) {
      TreeBuilder builder(dataset, model.params_, model.class_weights_,
                          model.params_.features_per_split, derive_seed(params.seed, t));
      model.trees_[t] = builder.build();
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(params.threads, 1, params.n_trees);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return model;
}

PredictionResult predict_forest(const ForestModel& model, const SparseVector& x) {
  if (x.dimension != model.dimension()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "predict_forest: vector dimension " + std::to_string(x.dimension) +
                    " != model dimension " + std::to_string(model.dimension()));
  }
  ClassVector acc{};
  const ClassVector& w = model.class_weights();
  for (const Tree& tree : model.trees()) {
    const TreeNode& leaf = tree.leaf_for(x);
    ClassVector dist;
    double total = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      dist[k] = leaf.counts[k] * w[k];
      total += dist[k];
    }
    for (std::size_t k = 0; k < kNumClasses; ++k) acc[k] += dist[k] / total;
  }
  const double n = static_cast<double>(model.trees().size());
  for (double& p : acc) p /= n;
  return make_prediction(acc);
}

void ForestModel::validate() const {
  params_.validate();
  for (double wk : class_weights_) {
    if (!(wk > 0.0) || !std::isfinite(wk)) {
      throw Error(ErrorKind::kFormat, "forest: class weights must be finite and > 0");
    }
  }
  if (trees_.empty()) throw Error(ErrorKind::kFormat, "forest: no trees");
  for (const Tree& tree : trees_) {
    if (tree.nodes.empty()) throw Error(ErrorKind::kFormat, "forest: empty tree");
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf()) {
        if (std::all_of(n.counts.begin(), n.counts.end(), [](auto c) { return c == 0; })) {
          throw Error(ErrorKind::kFormat, "forest: leaf without counts");
        }
      } else if (static_cast<std::size_t>(n.feature) >= dimension_ || n.feature < 0 ||
                 n.left >= tree.nodes.size() || n.right >= tree.nodes.size()) {
        throw Error(ErrorKind::kFormat, "forest: node references out of range");
      }
    }
    if (tree.depth() > params_.max_depth) {
      throw Error(ErrorKind::kFormat, "forest: tree deeper than max_depth");
    }
  }
}

ForestModel ForestModel::from_trees(std::vector<Tree> trees, std::size_t dimension,
                                    ClassVector class_weights, ForestParams params,
                                    std::string vocabulary_hash) {
  ForestModel m;
  params.n_trees = trees.size();
  m.params_ = params;
  m.class_weights_ = class_weights;
  m.dimension_ = dimension;
  m.vocabulary_hash_ = std::move(vocabulary_hash);
  m.trees_ = std::move(trees);
  m.validate();
  return m;
}

namespace {

void write_preorder(const Tree& tree, std::uint32_t i, json& out) {
  const TreeNode& n = tree.nodes[i];
  if (n.is_leaf()) {
    out.push_back({{"c", n.counts}});
    return;
  }
  out.push_back({{"f", n.feature}, {"t", n.threshold}});
  write_preorder(tree, n.left, out);
  write_preorder(tree, n.right, out);
}

std::uint32_t read_preorder(const json& nodes, std::size_t& pos, Tree& tree) {
  if (pos >= nodes.size()) throw Error(ErrorKind::kFormat, "forest: truncated tree");
  const json& j = nodes[pos++];
  TreeNode n;
  if (j.contains("c")) {
    n.counts = j.at("c").get<ClassCounts>();
    tree.nodes.push_back(n);
    return static_cast<std::uint32_t>(tree.nodes.size() - 1);
  }
  n.feature = j.at("f").get<std::int32_t>();
  n.threshold = j.at("t").get<double>();
  if (n.feature < 0) throw Error(ErrorKind::kFormat, "forest: negative feature index");
  tree.nodes.push_back(n);
  const auto self = static_cast<std::uint32_t>(tree.nodes.size() - 1);
  const std::uint32_t left = read_preorder(nodes, pos, tree);
  const std::uint32_t right = read_preorder(nodes, pos, tree);
  tree.nodes[self].left = left;
  tree.nodes[self].right = right;
  return self;
}

}  // namespace

std::string ForestModel::to_json() const {
  json trees = json::array();
  for (const Tree& t : trees_) {
    json nodes = json::array();
    write_preorder(t, 0, nodes);
    trees.push_back(std::move(nodes));
  }
  json doc = {{"format_version", kForestFormatVersion},
              {"params",
               {{"n_trees", params_.n_trees},
                {"max_depth", params_.max_depth},
                {"min_samples_leaf", params_.min_samples_leaf},
                {"features_per_split", params_.features_per_split},
                {"seed", params_.seed},
                {"class_weights", class_weights_}}},
              {"dimension", dimension_},
              {"vocabulary_hash", vocabulary_hash_},
              {"trees", std::move(trees)}};
  return doc.dump();
}

ForestModel ForestModel::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format_version").get<int>() != kForestFormatVersion) {
      throw Error(ErrorKind::kFormat, "unsupported forest format_version");
    }
    const json& p = doc.at("params");
    ForestModel m;
    m.params_.n_trees = p.at("n_trees").get<std::size_t>();
    m.params_.max_depth = p.at("max_depth").get<std::size_t>();
    m.params_.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
    m.params_.features_per_split = p.at("features_per_split").get<std::size_t>();
    m.params_.seed = p.at("seed").get<std::uint64_t>();
    m.class_weights_ = p.at("class_weights").get<ClassVector>();
    m.params_.class_weights = m.class_weights_;
    m.dimension_ = doc.at("dimension").get<std::size_t>();
    m.vocabulary_hash_ = doc.at("vocabulary_hash").get<std::string>();
    for (const json& nodes : doc.at("trees")) {
      Tree t;
      std::size_t pos = 0;
      read_preorder(nodes, pos, t);
      if (pos != nodes.size()) throw Error(ErrorKind::kFormat, "forest: trailing tree nodes");
      m.trees_.push_back(std::move(t));
    }
    if (m.trees_.size() != m.params_.n_trees) {
      throw Error(ErrorKind::kFormat, "forest: tree count does not match n_trees");
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed forest model: ") + e.what());
  }
}

void ForestModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write forest model: " + path);
  out << to_json() << '\n';
}

ForestModel ForestModel::load(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read forest model: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ForestModel m = from_json(ss.str());
  if (m.vocabulary_hash_ != vocab.content_hash() || m.dimension_ != vocab.size()) {
    throw Error(ErrorKind::kVocabularyMismatch,
                "forest model was trained against a different vocabulary (hash " +
                    m.vocabulary_hash_ + ", supplied " + vocab.content_hash() + ")");
  }
  return m;
}

}  // namespace evtriage
