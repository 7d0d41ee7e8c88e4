#include "evtriage/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "evtriage/error.hpp"
#include "evtriage/forest.hpp"
#include "evtriage/kernels.hpp"
#include "evtriage/rng.hpp"

namespace evtriage {

using nlohmann::json;

LinearModel LinearModel::zeros(std::size_t dimension, LinearHyperparams hp) {
  LinearModel m;
  m.dimension = dimension;
  m.weights.assign(kNumClasses * dimension, 0.0);
  m.hyperparams = std::move(hp);
  return m;
}

ClassVector softmax(const ClassVector& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  ClassVector p;
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p[k] = std::exp(z[k] - zmax);
    sum += p[k];
  }
  for (double& pk : p) pk /= sum;
  return p;
}

ClassVector logits(const LinearModel& model, std::span<const double> e) {
  if (e.size() != model.dimension) {
    throw Error(ErrorKind::kDimensionMismatch,
                "linear: embedding dimension " + std::to_string(e.size()) +
                    " != model dimension " + std::to_string(model.dimension));
  }
  ClassVector z;
  for (std::size_t k = 0; k < kNumClasses; ++k) z[k] = kernels::dot(model.row(k), e) + model.bias[k];
  return z;
}

PredictionResult forward(const LinearModel& model, std::span<const double> e) {
  return make_prediction(softmax(logits(model, e)));
}

namespace {

// -ln softmax(z)[gold], via log-sum-exp.
double cross_entropy(const ClassVector& z, std::size_t gold) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double zk : z) s += std::exp(zk - zmax);
  return zmax + std::log(s) - z[gold];
}

// Adds the data term over `indices` into grad and returns its summed loss.
// Gradient entries are scaled by 1/denominator.
template <class SampleAt>
double accumulate_data_term(const LinearModel& model, std::span<const std::size_t> indices,
                            SampleAt&& sample_at, std::span<const double> sample_weights,
                            double denominator, Gradient& grad) {
  double loss = 0.0;
  for (std::size_t i : indices) {
    const LabeledEmbedding& s = sample_at(i);
    const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
    const ClassVector z = logits(model, s.x);
    const ClassVector p = softmax(z);
    const std::size_t gold = index_of(s.label);
    loss += w * cross_entropy(z, gold);
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const double dz = w * (p[k] - (k == gold ? 1.0 : 0.0)) / denominator;
      kernels::axpy(dz, s.x, {grad.weights.data() + k * model.dimension, model.dimension});
      grad.bias[k] += dz;
    }
  }
  return loss;
}

void add_regularizer(const LinearModel& model, double& loss, Gradient& grad) {
  const double l2 = model.hyperparams.l2_lambda;
  if (l2 == 0.0) return;
  loss += 0.5 * l2 * kernels::sum_squares(model.weights);
  kernels::axpy(l2, model.weights, grad.weights);
}

void validate_hyperparams(const LinearHyperparams& hp) {
  if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate)) {
    throw Error(ErrorKind::kInvalidArgument, "learning_rate must be finite and > 0");
  }
  if (hp.batch_size < 1) throw Error(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  if (!(hp.l2_lambda >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "l2_lambda must be >= 0");
  if (hp.class_weights) {
    for (double w : *hp.class_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error(ErrorKind::kInvalidArgument, "class weights must be finite and > 0");
      }
    }
  }
}

}  // namespace

LossAndGrad loss_and_grad(const LinearModel& model, std::span<const LabeledEmbedding> batch,
                          std::span<const double> sample_weights) {
  if (batch.empty()) throw Error(ErrorKind::kEmptyInput, "loss_and_grad: empty batch");
  if (!sample_weights.empty() && sample_weights.size() != batch.size()) {
    throw Error(ErrorKind::kLengthMismatch, "loss_and_grad: sample weight count mismatch");
  }
  LossAndGrad out;
  out.grad.weights.assign(model.weights.size(), 0.0);
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  const double n = static_cast<double>(batch.size());
  out.loss = accumulate_data_term(
                 model, idx, [&](std::size_t i) -> const LabeledEmbedding& { return batch[i]; },
                 sample_weights, n, out.grad) /
             n;
  add_regularizer(model, out.loss, out.grad);
  return out;
}

double dataset_objective(const LinearModel& model, std::span<const LabeledEmbedding> dataset,
                         const ClassVector& class_weights) {
  std::vector<double> w(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) w[i] = class_weights[index_of(dataset[i].label)];
  return loss_and_grad(model, dataset, w).loss;
}

LinearModel train_linear(std::span<const LabeledEmbedding> dataset, const LinearHyperparams& hp,
                         const std::function<void(const EpochReport&)>& on_epoch) {
  validate_hyperparams(hp);
  if (dataset.empty()) throw Error(ErrorKind::kEmptyInput, "train_linear: empty dataset");
  const std::size_t d = dataset[0].x.size();
  std::vector<DocClass> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (s.x.size() != d) {
      throw Error(ErrorKind::kDimensionMismatch, "train_linear: embeddings differ in dimension");
    }
    labels.push_back(s.label);
  }
  if (d == 0) throw Error(ErrorKind::kInvalidArgument, "train_linear: zero-dimensional embeddings");

  LinearHyperparams resolved = hp;
  const ClassVector cw = hp.class_weights.value_or(inverse_frequency_weights(labels));
  resolved.class_weights = cw;
  LinearModel model = LinearModel::zeros(d, resolved);

  std::vector<double> sample_weights(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) sample_weights[i] = cw[index_of(labels[i])];

  std::vector<std::size_t> order(dataset.size());
  Gradient grad;
  auto sample_at = [&](std::size_t i) -> const LabeledEmbedding& { return dataset[i]; };
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(derive_seed(hp.seed, epoch));
    seeded_shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t len = std::min(hp.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      grad.weights.assign(model.weights.size(), 0.0);
      grad.bias.fill(0.0);
      double loss = accumulate_data_term(model, batch, sample_at, sample_weights,
                                         static_cast<double>(len), grad);
      add_regularizer(model, loss, grad);
      kernels::axpy(-hp.learning_rate, grad.weights, model.weights);
      for (std::size_t k = 0; k < kNumClasses; ++k) model.bias[k] -= hp.learning_rate * grad.bias[k];
    }

    const double objective = dataset_objective(model, dataset, cw);
    if (!std::isfinite(objective)) {
      throw Error(ErrorKind::kDivergence,
                  "train_linear: loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (on_epoch) on_epoch({epoch, objective});
  }
  return model;
}

std::string LinearModel::to_json() const {
  json rows = json::array();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    rows.push_back(std::vector<double>(row(k).begin(), row(k).end()));
  }
  json hp = {{"learning_rate", hyperparams.learning_rate},
             {"epochs", hyperparams.epochs},
             {"batch_size", hyperparams.batch_size},
             {"l2_lambda", hyperparams.l2_lambda},
             {"seed", hyperparams.seed}};
  if (hyperparams.class_weights) hp["class_weights"] = *hyperparams.class_weights;
  json doc = {{"format_version", kLinearFormatVersion},
              {"d", dimension},
              {"hyperparameters", std::move(hp)},
              {"weights", std::move(rows)},
              {"bias", bias}};
  return doc.dump();
}

LinearModel LinearModel::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format_version").get<int>() != kLinearFormatVersion) {
      throw Error(ErrorKind::kFormat, "unsupported linear model format_version");
    }
    LinearHyperparams hp;
    const json& h = doc.at("hyperparameters");
    hp.learning_rate = h.at("learning_rate").get<double>();
    hp.epochs = h.at("epochs").get<std::size_t>();
    hp.batch_size = h.at("batch_size").get<std::size_t>();
    hp.l2_lambda = h.at("l2_lambda").get<double>();
    hp.seed = h.at("seed").get<std::uint64_t>();
    if (h.contains("class_weights")) hp.class_weights = h.at("class_weights").get<ClassVector>();

    LinearModel m = zeros(doc.at("d").get<std::size_t>(), hp);
    const json& rows = doc.at("weights");
    if (rows.size() != kNumClasses) throw Error(ErrorKind::kFormat, "linear model needs 5 weight rows");
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const auto r = rows[k].get<std::vector<double>>();
      if (r.size() != m.dimension) throw Error(ErrorKind::kFormat, "linear model row has wrong length");
      std::copy(r.begin(), r.end(), m.row(k).begin());
    }
    m.bias = doc.at("bias").get<ClassVector>();
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(m.weights.begin(), m.weights.end(), finite) ||
        !std::all_of(m.bias.begin(), m.bias.end(), finite)) {
      throw Error(ErrorKind::kNonFiniteValue, "linear model has non-finite parameters");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed linear model: ") + e.what());
  }
}

void LinearModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write linear model: " + path);
  out << to_json() << '\n';
}

LinearModel LinearModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read linear model: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace evtriage
