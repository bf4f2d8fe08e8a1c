#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gpcd/error.hpp"
#include "gpcd/graph.hpp"
#include "gpcd/rng.hpp"

namespace gpcd {

/// Graphs with a planted causal subgraph. Causal nodes of a class-c graph draw features from
/// N(m_c, I) and are wired as a path; noise nodes draw from the class-independent N(0, s^2 I)
/// and are wired Erdos-Renyi among themselves.
struct PlantedConfig {
  std::size_t n_samples = 700;
  int num_classes = 3;
  std::size_t causal_nodes = 3;
  std::size_t noise_nodes = 7;
  std::size_t feature_dim = 8;
  std::uint64_t seed = 0;
  double margin = 4.0;       // pairwise distance between class means
  double edge_prob = 0.3;    // noise-noise edge probability
  double noise_std = 1.0;    // std of noise-node features
};

inline void validate(const PlantedConfig& c) {
  if (c.n_samples == 0) fail(Errc::InvalidConfig, "n_samples must be positive");
  if (c.num_classes < 1) fail(Errc::InvalidConfig, "num_classes must be positive");
  if (c.causal_nodes == 0) fail(Errc::InvalidConfig, "causal_nodes must be >= 1");
  if (c.feature_dim < static_cast<std::size_t>(c.num_classes))
    fail(Errc::InvalidConfig, "feature_dim must be >= num_classes");
  if (!(c.margin > 0.0)) fail(Errc::InvalidConfig, "margin must be positive");
  if (!(c.edge_prob >= 0.0 && c.edge_prob <= 1.0)) fail(Errc::InvalidConfig, "edge_prob outside [0,1]");
  if (!(c.noise_std >= 0.0)) fail(Errc::InvalidConfig, "noise_std must be non-negative");
}

/// Mean feature vector of class c: (margin / sqrt 2) * e_c, so any two means are `margin` apart.
inline std::vector<double> class_mean(const PlantedConfig& c, int cls) {
  std::vector<double> m(c.feature_dim, 0.0);
  m[static_cast<std::size_t>(cls)] = c.margin / std::sqrt(2.0);
  return m;
}

inline PLLSample gen_planted_sample(const PlantedConfig& c, std::size_t index) {
  Rng rng = make_rng(c.seed, index);
  std::uniform_int_distribution<int> pick_class(0, c.num_classes - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(c.edge_prob);

  const int cls = pick_class(rng);
  const std::size_t n = c.causal_nodes + c.noise_nodes;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  // order[i] is the node index of the i-th planted role (causal first, then noise).

  const auto mean = class_mean(c, cls);
  Tensor feats(n, c.feature_dim);
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t node = order[i];
    const bool causal = i < c.causal_nodes;
    mask[node] = causal;
    for (std::size_t f = 0; f < c.feature_dim; ++f)
      feats(node, f) = causal ? mean[f] + normal(rng) : c.noise_std * normal(rng);
  }

  std::vector<Edge> edges;
  for (std::size_t i = 1; i < c.causal_nodes; ++i) edges.emplace_back(order[i - 1], order[i]);
  for (std::size_t i = c.causal_nodes; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(order[i], order[j]);

  PLLSample s;
  s.graph = make_graph(std::move(feats), std::move(edges));
  s.ground_truth = cls;
  s.candidates = CandidateLabelSet{{cls}, c.num_classes};
  s.causal_mask = std::move(mask);
  return s;
}

/// Deterministic per seed; every sample uses its own sub-stream derived from (seed, index).
/// Candidate sets hold only the ground truth (K = 1) until a pll-noise generator runs.
inline Dataset gen_planted_dataset(const PlantedConfig& c) {
  validate(c);
  Dataset ds;
  ds.num_classes = c.num_classes;
  ds.candidate_count = 1;
  ds.feature_dim = c.feature_dim;
  ds.samples.reserve(c.n_samples);
  for (std::size_t i = 0; i < c.n_samples; ++i) ds.samples.push_back(gen_planted_sample(c, i));
  return ds;
}

struct SplitDatasets {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Consecutive split: first n_train samples, then n_val, then the rest up to n_test.
inline SplitDatasets split_by_counts(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                                     std::size_t n_test) {
  if (n_train + n_val + n_test > ds.size())
    fail(Errc::InvalidConfig, "split sizes exceed dataset size");
  auto slice = [&](std::size_t begin, std::size_t count, Split tag) {
    Dataset out;
    out.split = tag;
    out.num_classes = ds.num_classes;
    out.candidate_count = ds.candidate_count;
    out.feature_dim = ds.feature_dim;
    out.samples.assign(ds.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                       ds.samples.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return out;
  };
  return {slice(0, n_train, Split::Train), slice(n_train, n_val, Split::Validation),
          slice(n_train + n_val, n_test, Split::Test)};
}

/// 80/10/10 by default, rounding toward the training split.
inline SplitDatasets split_by_ratio(const Dataset& ds, double train = 0.8, double val = 0.1) {
  if (train < 0 || val < 0 || train + val > 1.0) fail(Errc::InvalidConfig, "bad split ratio");
  const auto n = ds.size();
  const auto n_val = static_cast<std::size_t>(std::floor(val * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor((1.0 - train - val) * static_cast<double>(n) + 1e-9));
  return split_by_counts(ds, n - n_val - n_test, n_val, n_test);
}

}  // namespace gpcd
