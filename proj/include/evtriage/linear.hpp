#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtriage/doc_class.hpp"
#include "evtriage/embed.hpp"
#include "evtriage/prediction.hpp"

namespace evtriage {

struct LinearHyperparams {
  double learning_rate = 0.1;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 42;
  // Unset means inverse frequency over the training set.
  std::optional<ClassVector> class_weights;
};

inline constexpr int kLinearFormatVersion = 1;

// Multinomial logistic regression: logits = W e + b.
struct LinearModel {
  std::size_t dimension = 0;
  std::vector<double> weights;  // kNumClasses x dimension, row-major
  ClassVector bias{};
  LinearHyperparams hyperparams;

  static LinearModel zeros(std::size_t dimension, LinearHyperparams hp = {});

  std::span<const double> row(std::size_t k) const {
    return {weights.data() + k * dimension, dimension};
  }
  std::span<double> row(std::size_t k) { return {weights.data() + k * dimension, dimension}; }

  std::string to_json() const;
  static LinearModel from_json(std::string_view text);
  void save(const std::string& path) const;
  static LinearModel load(const std::string& path);

  bool operator==(const LinearModel& o) const {
    return dimension == o.dimension && weights == o.weights && bias == o.bias;
  }
};

struct LabeledEmbedding {
  DenseEmbedding x;
  DocClass label;
};

// Subtracts the max before exponentiating.
ClassVector softmax(const ClassVector& logits);

ClassVector logits(const LinearModel& model, std::span<const double> e);
PredictionResult forward(const LinearModel& model, std::span<const double> e);

struct Gradient {
  std::vector<double> weights;  // same layout as LinearModel::weights
  ClassVector bias{};
};

struct LossAndGrad {
  double loss = 0.0;
  Gradient grad;
};

// Mean over the batch of sample_weight * -ln p(gold) plus (l2/2)||W||^2.
// sample_weights empty means every sample weighs 1.
LossAndGrad loss_and_grad(const LinearModel& model, std::span<const LabeledEmbedding> batch,
                          std::span<const double> sample_weights = {});

struct EpochReport {
  std::size_t epoch = 0;
  double loss = 0.0;  // full-dataset objective after the epoch
};

// Mini-batch gradient descent from a zero model, reshuffling with a seeded
// stream each epoch. Throws ErrorKind::kDivergence on a non-finite loss.
LinearModel train_linear(std::span<const LabeledEmbedding> dataset, const LinearHyperparams& hp,
                         const std::function<void(const EpochReport&)>& on_epoch = {});

// Full-dataset objective with the class weights train_linear would use.
double dataset_objective(const LinearModel& model, std::span<const LabeledEmbedding> dataset,
                         const ClassVector& class_weights);

}  // namespace evtriage
