#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "evtriage/forest.hpp"
#include "evtriage/linear.hpp"
#include "evtriage/rng.hpp"

namespace evtriage::testing {

inline double class_sum(const ClassVector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline double gini_oracle(const ClassVector& c) {
  const double t = class_sum(c);
  double s = 0.0;
  for (double x : c) s += (x / t) * (x / t);
  return 1.0 - s;
}

// Exhaustive search over every (feature, midpoint) pair.
inline std::optional<Split> brute_force_split(const std::vector<WeightedSample>& samples,
                                              const std::vector<std::uint32_t>& features,
                                              std::size_t min_leaf) {
  ClassVector parent{};
  for (const auto& s : samples) parent[index_of(s.label)] += s.weight;
  const double total = class_sum(parent);
  const double g = gini_oracle(parent);
  std::vector<std::uint32_t> sorted = features;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Split> all;
  for (std::uint32_t f : sorted) {
    std::set<double> values;
    for (const auto& s : samples) values.insert(s.x->at(f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double thr = *it + (*std::next(it) - *it) / 2.0;
      ClassVector l{}, r{};
      std::size_t nl = 0, nr = 0;
      for (const auto& s : samples) {
        if (s.x->at(f) <= thr) {
          l[index_of(s.label)] += s.weight;
          ++nl;
        } else {
          r[index_of(s.label)] += s.weight;
          ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double d = g - class_sum(l) / total * gini_oracle(l) - class_sum(r) / total * gini_oracle(r);
      all.push_back({f, thr, d});
    }
  }
  double best = 0.0;
  for (const auto& s : all) best = std::max(best, s.impurity_decrease);
  if (best <= 1e-9) return std::nullopt;
  // `all` is ordered by (feature, threshold); the first near-maximum wins.
  for (const auto& s : all) {
    if (s.impurity_decrease >= best - 1e-9) return s;
  }
  return std::nullopt;
}

struct SplitInstance {
  std::vector<SparseVector> xs;
  std::vector<WeightedSample> samples;
  std::vector<std::uint32_t> features;
  std::size_t min_leaf = 1;
};

// Up to 50 samples and 8 features, values drawn partly from a coarse grid so
// ties between thresholds and features occur.
inline SplitInstance random_split_instance(SplitMix64& rng) {
  static const std::vector<double> grid = {0.0, 0.0, 0.1, 0.25, 0.5, 0.75, 1.0};
  SplitInstance inst;
  const std::size_t n = 1 + rng.bounded(50);
  const std::size_t dim = 1 + rng.bounded(8);
  const std::size_t n_classes = 2 + rng.bounded(4);
  const bool weighted = rng.bounded(2) == 1;
  inst.min_leaf = 1 + rng.bounded(3);
  inst.xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.bounded(3) == 0 ? rng.uniform() : grid[rng.bounded(grid.size())];
    inst.xs.push_back(make_sparse(v));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? 0.25 + rng.uniform() * 4.0 : 1.0;
    inst.samples.push_back({&inst.xs[i], class_at(rng.bounded(n_classes)), w});
  }
  for (std::uint32_t f = 0; f < dim; ++f) {
    if (rng.bounded(4) != 0) inst.features.push_back(f);
  }
  return inst;
}

inline bool same_split(const std::optional<Split>& got, const std::optional<Split>& want) {
  if (got.has_value() != want.has_value()) return false;
  if (!got) return true;
  return got->feature == want->feature &&
         std::abs(got->threshold - want->threshold) <= 1e-15 * std::max(1.0, std::abs(want->threshold)) &&
         std::abs(got->impurity_decrease - want->impurity_decrease) <= 1e-9;
}

inline DenseEmbedding random_unit(SplitMix64& rng, std::size_t d) {
  DenseEmbedding v(d);
  double s = 0.0;
  for (double& x : v) {
    x = rng.uniform() * 2.0 - 1.0;
    s += x * x;
  }
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

inline LinearModel random_model(SplitMix64& rng, std::size_t d, double l2) {
  LinearHyperparams hp;
  hp.l2_lambda = l2;
  LinearModel m = LinearModel::zeros(d, hp);
  for (double& w : m.weights) w = rng.uniform() * 2.0 - 1.0;
  for (double& b : m.bias) b = rng.uniform() * 2.0 - 1.0;
  return m;
}

// Largest relative error between the analytic gradient and central
// differences over every parameter of a random d=8, batch=4 instance.
inline double gradient_check(SplitMix64& rng, double l2) {
  LinearModel m = random_model(rng, 8, l2);
  std::vector<LabeledEmbedding> batch;
  std::vector<double> weights;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({random_unit(rng, 8), class_at(rng.bounded(5))});
    weights.push_back(0.5 + rng.uniform());
  }
  const auto lg = loss_and_grad(m, batch, weights);
  const double h = 1e-5;
  auto objective = [&](const LinearModel& mm) { return loss_and_grad(mm, batch, weights).loss; };
  double worst = 0.0;
  auto record = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    LinearModel p = m, q = m;
    p.weights[j] += h;
    q.weights[j] -= h;
    record(lg.grad.weights[j], (objective(p) - objective(q)) / (2 * h));
  }
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    LinearModel p = m, q = m;
    p.bias[k] += h;
    q.bias[k] -= h;
    record(lg.grad.bias[k], (objective(p) - objective(q)) / (2 * h));
  }
  return worst;
}

}  // namespace evtriage::testing
