#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gpcd/autodiff.hpp"
#include "gpcd/clustering.hpp"
#include "gpcd/graph.hpp"
#include "gpcd/model.hpp"

namespace gpcd {

/// Selected prototype centers C* with their learnable outputs O (one row per prototype).
struct PrototypeSet {
  Tensor centers;                      // |C*| x H
  Parameter outputs{"prototype.outputs", Tensor()};  // |C*| x D, entries in [-1, 1]
  std::vector<std::size_t> cluster_ids;
  std::vector<std::size_t> member_counts;
  std::size_t extraction_round = 0;
  double delta_used = 0.0;

  std::size_t size() const noexcept { return centers.rows(); }
  bool empty() const noexcept { return centers.rows() == 0; }
};

struct DeltaSchedule {
  double initial = 0.15;
  double step = 0.05;
  double cap = 0.9;
};

inline double delta_schedule(std::size_t round, const DeltaSchedule& s = {}) {
  return std::min(s.initial + static_cast<double>(round) * s.step, s.cap);
}

/// Clusters whose members all exceed +delta, or all fall below -delta, in some class column.
/// `projs` holds delta-bar outputs row-aligned with `clusters.assignments`.
inline std::vector<std::size_t> select_clusters(const ClusterResult& clusters, const Tensor& projs, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) fail(Errc::InvalidDelta, "delta=" + std::to_string(delta));
  if (projs.rows() != clusters.assignments.size()) fail(Errc::DimMismatch, "projections not aligned with points");
  const std::size_t k = clusters.k(), d = projs.cols();
  // all_above[j*d + c]: every member of j has proj[c] > delta (vacuously true for empty j).
  std::vector<char> all_above(k * d, 1), all_below(k * d, 1);
  std::vector<std::size_t> members(k, 0);
  for (std::size_t p = 0; p < projs.rows(); ++p) {
    const auto j = static_cast<std::size_t>(clusters.assignments[p]);
    ++members[j];
    for (std::size_t c = 0; c < d; ++c) {
      const double v = projs(p, c);
      if (!(v > delta)) all_above[j * d + c] = 0;
      if (!(v < -delta)) all_below[j * d + c] = 0;
    }
  }
  std::vector<std::size_t> picked;
  for (std::size_t j = 0; j < k; ++j) {
    if (members[j] == 0) continue;
    for (std::size_t c = 0; c < d; ++c)
      if (all_above[j * d + c] || all_below[j * d + c]) {
        picked.push_back(j);
        break;
      }
  }
  return picked;
}

/// Builds (C*, O) from the clusters passing the +/-delta criteria; o_j = delta-bar(c*_j).
inline PrototypeSet select_prototypes(const ClusterResult& clusters, const Tensor& projs, const NodeHeadParams& head,
                                      double delta) {
  const auto picked = select_clusters(clusters, projs, delta);
  PrototypeSet out;
  out.delta_used = delta;
  const std::size_t h = clusters.centers.cols();
  out.centers = Tensor(picked.size(), h);
  std::vector<std::size_t> counts(clusters.k(), 0);
  for (int a : clusters.assignments) ++counts[static_cast<std::size_t>(a)];
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto src = clusters.centers.row(picked[i]);
    std::copy(src.begin(), src.end(), out.centers.row(i).begin());
    out.member_counts.push_back(counts[picked[i]]);
  }
  out.cluster_ids = picked;
  Tensor o = picked.empty() ? Tensor(0, head.w2.value.cols()) : node_project(out.centers, head);
  out.outputs = Parameter("prototype.outputs", std::move(o));
  return out;
}

inline void clamp_outputs(PrototypeSet& ps) {
  for (double& v : ps.outputs.value.data()) v = std::clamp(v, -1.0, 1.0);
}

struct NodeTable {
  Tensor reprs;   // P x H, all training nodes in sample order
  Tensor projs;   // P x D
};

/// psi and delta-bar outputs for every node of every sample, concatenated in sample order.
inline NodeTable encode_all(const Dataset& ds, const Model& model) {
  std::size_t total = 0;
  for (const auto& s : ds.samples) total += s.graph.node_count();
  NodeTable t{Tensor(total, model.dims.node_dim()), Tensor(total, static_cast<std::size_t>(model.dims.num_classes))};
  std::size_t at = 0;
  for (const auto& s : ds.samples) {
    Tape tape(Tape::Mode::Inference);
    Var h = encode_nodes(tape, s.graph, model.encoder);
    Var p = node_project(tape, h, model.head);
    for (std::size_t l = 0; l < s.graph.node_count(); ++l, ++at) {
      std::copy(h.value().row(l).begin(), h.value().row(l).end(), t.reprs.row(at).begin());
      std::copy(p.value().row(l).begin(), p.value().row(l).end(), t.projs.row(at).begin());
    }
  }
  return t;
}

struct Extraction {
  PrototypeSet prototypes;
  std::size_t clusters = 0;
  double amse = 0.0;
  std::vector<ElbowRound> rounds;
};

/// Encode all training nodes, elbow-cluster them, and keep the clusters meeting the criteria.
inline Extraction extract(const Dataset& train, const Model& model, const ElbowOptions& clustering, double delta,
                          std::size_t round = 0) {
  const NodeTable table = encode_all(train, model);
  ElbowResult er = elbow_cluster(table.reprs, clustering);
  Extraction ex;
  ex.prototypes = select_prototypes(er.best, table.projs, model.head, delta);
  ex.prototypes.extraction_round = round;
  ex.clusters = er.best.k();
  ex.amse = er.best.amse;
  ex.rounds = std::move(er.rounds);
  return ex;
}

/// score_l = max_d |delta-bar(psi(g))[l, d]|, in [0, 1).
inline std::vector<double> node_attribution(const Graph& g, const EncoderParams& enc, const NodeHeadParams& head) {
  const Tensor p = node_project(encode_nodes(g, enc), head);
  std::vector<double> score(p.rows(), 0.0);
  for (std::size_t l = 0; l < p.rows(); ++l)
    for (double v : p.row(l)) score[l] = std::max(score[l], std::abs(v));
  return score;
}

/// Indices of the `count` highest scores (ties to the lower index).
inline std::vector<std::size_t> top_nodes(const std::vector<double>& score, std::size_t count) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

struct RecoveryStats {
  double precision = 0.0;  // mean over graphs
  double recall = 0.0;
  std::size_t graphs = 0;
};

/// Per graph, select the top-(causal count) nodes by attribution and score them against the
/// planted mask. Samples without a mask, or with no causal node, are skipped.
inline RecoveryStats cause_recovery(const Dataset& ds, const Model& model) {
  RecoveryStats st;
  for (const auto& s : ds.samples) {
    if (!s.causal_mask) continue;
    const auto& mask = *s.causal_mask;
    const auto causal = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (causal == 0) continue;
    const auto top = top_nodes(node_attribution(s.graph, model.encoder, model.head), causal);
    std::size_t hit = 0;
    for (std::size_t l : top) hit += mask[l] ? 1 : 0;
    st.precision += top.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(top.size());
    st.recall += static_cast<double>(hit) / static_cast<double>(causal);
    ++st.graphs;
  }
  if (st.graphs > 0) {
    st.precision /= static_cast<double>(st.graphs);
    st.recall /= static_cast<double>(st.graphs);
  }
  return st;
}

}  // namespace gpcd
