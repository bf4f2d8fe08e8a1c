#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gpcd/error.hpp"
#include "gpcd/tensor.hpp"

namespace gpcd {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected graph with per-node features. Immutable once built by make_graph.
class Graph {
 public:
  Graph() = default;

  std::size_t node_count() const noexcept { return features_.rows(); }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const Tensor& node_features() const noexcept { return features_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::vector<std::size_t>>& neighbors() const noexcept { return adjacency_; }

  /// Row-normalized adjacency: row l averages the neighbors of l (zero row if isolated).
  const Tensor& mean_adjacency() const noexcept { return mean_adj_; }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.features_ == b.features_ && a.edges_ == b.edges_;
  }

 private:
  friend Graph make_graph(Tensor features, std::vector<Edge> edges);

  Tensor features_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
  Tensor mean_adj_;
};

/// Validates and builds a graph. Edges are stored as given (order preserved).
inline Graph make_graph(Tensor features, std::vector<Edge> edges) {
  const std::size_t n = features.rows();
  if (n == 0 || features.cols() == 0) fail(Errc::EmptyGraph, "graph needs at least one node and feature");
  std::set<Edge> seen;
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n)
      fail(Errc::IndexOutOfRange, "edge (" + std::to_string(u) + "," + std::to_string(v) + ") with " +
                                      std::to_string(n) + " nodes");
    if (u == v) fail(Errc::SelfLoop, "self-loop at node " + std::to_string(u));
    if (!seen.insert(std::minmax(u, v)).second)
      fail(Errc::DuplicateEdge, "duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
  }
  Graph g;
  g.features_ = std::move(features);
  g.edges_ = std::move(edges);
  g.adjacency_.assign(n, {});
  for (const auto& [u, v] : g.edges_) {
    g.adjacency_[u].push_back(v);
    g.adjacency_[v].push_back(u);
  }
  g.mean_adj_ = Tensor(n, n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& nb = g.adjacency_[l];
    for (std::size_t m : nb) g.mean_adj_(l, m) += 1.0 / static_cast<double>(nb.size());
  }
  return g;
}

/// Column-wise mean of a |V| x H node matrix.
inline std::vector<double> global_mean_pool(const Tensor& node_matrix) {
  if (node_matrix.rows() == 0) fail(Errc::EmptyGraph, "global_mean_pool on zero rows");
  return kernels::mean_rows(node_matrix).vec();
}

/// Subgraph on the nodes with keep[l] == true, with the edges among them; node order kept.
inline Graph induced_subgraph(const Graph& g, const std::vector<bool>& keep) {
  if (keep.size() != g.node_count()) fail(Errc::DimMismatch, "mask length != node count");
  std::vector<std::size_t> remap(g.node_count(), g.node_count());
  std::size_t kept = 0;
  for (std::size_t l = 0; l < keep.size(); ++l)
    if (keep[l]) remap[l] = kept++;
  if (kept == 0) fail(Errc::EmptyGraph, "mask selects no nodes");
  Tensor feats(kept, g.feature_dim());
  for (std::size_t l = 0; l < keep.size(); ++l)
    if (keep[l]) std::copy(g.node_features().row(l).begin(), g.node_features().row(l).end(),
                           feats.row(remap[l]).begin());
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edges())
    if (keep[u] && keep[v]) edges.emplace_back(remap[u], remap[v]);
  return make_graph(std::move(feats), std::move(edges));
}

/// K candidate labels stored as class indices; each stands for a one-hot vector of length D.
struct CandidateLabelSet {
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool contains(int c) const { return std::find(labels.begin(), labels.end(), c) != labels.end(); }

  /// K x D matrix of one-hot rows.
  Tensor one_hot() const {
    Tensor y(labels.size(), static_cast<std::size_t>(num_classes));
    for (std::size_t k = 0; k < labels.size(); ++k) y(k, static_cast<std::size_t>(labels[k])) = 1.0;
    return y;
  }

  friend bool operator==(const CandidateLabelSet&, const CandidateLabelSet&) = default;
};

inline void validate_candidates(const CandidateLabelSet& y, int ground_truth) {
  if (y.labels.empty()) fail(Errc::InvalidConfig, "empty candidate set");
  std::set<int> seen;
  for (int c : y.labels) {
    if (c < 0 || c >= y.num_classes) fail(Errc::IndexOutOfRange, "candidate class " + std::to_string(c));
    if (!seen.insert(c).second) fail(Errc::InvalidConfig, "duplicate candidate class " + std::to_string(c));
  }
  if (!y.contains(ground_truth)) fail(Errc::InvalidConfig, "ground truth missing from candidates");
}

struct PLLSample {
  Graph graph;
  CandidateLabelSet candidates;
  int ground_truth = 0;
  std::optional<std::vector<bool>> causal_mask;

  friend bool operator==(const PLLSample&, const PLLSample&) = default;
};

enum class Split { Train, Validation, Test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  fail(Errc::FormatError, "unknown split '" + s + "'");
}

/// Samples sharing D (classes), K (candidates per sample; 0 = varies per sample) and F.
struct Dataset {
  std::vector<PLLSample> samples;
  Split split = Split::Train;
  int num_classes = 0;
  int candidate_count = 1;
  std::size_t feature_dim = 0;

  std::size_t size() const noexcept { return samples.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void validate_sample(const PLLSample& s, int num_classes, std::size_t feature_dim) {
  if (s.graph.feature_dim() != feature_dim) fail(Errc::DimMismatch, "feature dim mismatch");
  if (s.ground_truth < 0 || s.ground_truth >= num_classes)
    fail(Errc::IndexOutOfRange, "ground truth " + std::to_string(s.ground_truth));
  if (s.candidates.num_classes != num_classes) fail(Errc::DimMismatch, "candidate class count mismatch");
  validate_candidates(s.candidates, s.ground_truth);
  if (s.causal_mask) {
    if (s.causal_mask->size() != s.graph.node_count()) fail(Errc::DimMismatch, "causal mask length");
    if (std::none_of(s.causal_mask->begin(), s.causal_mask->end(), [](bool b) { return b; }))
      fail(Errc::InvalidConfig, "causal mask has no true entry");
  }
}

inline void validate_dataset(const Dataset& ds) {
  for (const auto& s : ds.samples) {
    validate_sample(s, ds.num_classes, ds.feature_dim);
    if (ds.candidate_count > 0 && s.candidates.size() != static_cast<std::size_t>(ds.candidate_count))
      fail(Errc::FormatError, "sample has " + std::to_string(s.candidates.size()) + " candidates, dataset K=" +
                                  std::to_string(ds.candidate_count));
  }
}

}  // namespace gpcd
