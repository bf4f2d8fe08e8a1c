#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gpcd/autodiff.hpp"
#include "gpcd/graph.hpp"
#include "gpcd/model.hpp"

namespace gpcd {

inline constexpr double kDegenerateColumn = 1e-12;

// ---------------------------------------------------------------------------------------------
// Candidate cross-entropy

/// Per-class weights count(class in Y)/K, so that CE = -sum_d w_d log p_d.
inline Tensor candidate_weights(const CandidateLabelSet& y) {
  Tensor w(1, static_cast<std::size_t>(y.num_classes));
  const double inv_k = 1.0 / static_cast<double>(y.size());
  for (int c : y.labels) w[static_cast<std::size_t>(c)] += inv_k;
  return w;
}

/// (1/K) sum_k -log pred[class(Y^k)]; probabilities below 1e-30 are clamped (and counted).
inline double ce_candidates(std::span<const double> pred, const CandidateLabelSet& y,
                            std::size_t* clamped = nullptr) {
  if (pred.size() != static_cast<std::size_t>(y.num_classes)) fail(Errc::DimMismatch, "pred width != D");
  double total = 0.0;
  for (int c : y.labels) {
    double p = pred[static_cast<std::size_t>(c)];
    if (!(p >= ops::kLogFloor)) {
      p = ops::kLogFloor;
      if (clamped) ++*clamped;
    }
    total -= std::log(p);
  }
  return total / static_cast<double>(y.size());
}

inline Var ce_candidates(Var pred, const CandidateLabelSet& y) {
  if (pred.rows() != 1 || pred.cols() != static_cast<std::size_t>(y.num_classes))
    fail(Errc::DimMismatch, "pred must be 1 x D");
  Var weights = pred.tape->constant(candidate_weights(y));
  return ops::scale(ops::sum_all(ops::elementwise_mul(ops::log(pred), weights)), -1.0);
}

/// -sum_d target_d log pred_d with a constant target distribution.
inline Var cross_entropy(Var pred, std::span<const double> target) {
  if (pred.cols() != target.size() || pred.rows() != 1) fail(Errc::DimMismatch, "cross_entropy widths");
  Var t = pred.tape->constant(Tensor::row_vector(target));
  return ops::scale(ops::sum_all(ops::elementwise_mul(ops::log(pred), t)), -1.0);
}

// ---------------------------------------------------------------------------------------------
// Mask matrix and node-level prediction

/// M[l,d] = |p[l,d]| / sum_l' |p[l',d]|; a column whose denominator is below 1e-12 is uniform.
inline Tensor mask_matrix(const Tensor& proj) {
  Tensor m(proj.rows(), proj.cols());
  const double uniform = 1.0 / static_cast<double>(proj.rows());
  for (std::size_t d = 0; d < proj.cols(); ++d) {
    double denom = 0.0;
    for (std::size_t l = 0; l < proj.rows(); ++l) denom += std::abs(proj(l, d));
    for (std::size_t l = 0; l < proj.rows(); ++l)
      m(l, d) = denom < kDegenerateColumn ? uniform : std::abs(proj(l, d)) / denom;
  }
  return m;
}

/// s[d] = sum_l (M o p)[l,d]: the |p|-weighted mean of column d.
inline std::vector<double> masked_scores(const Tensor& proj) {
  if (proj.rows() == 0) fail(Errc::EmptyGraph, "masked_scores on zero nodes");
  const Tensor m = mask_matrix(proj);
  std::vector<double> s(proj.cols(), 0.0);
  for (std::size_t l = 0; l < proj.rows(); ++l)
    for (std::size_t d = 0; d < proj.cols(); ++d) s[d] += m(l, d) * proj(l, d);
  return s;
}

inline Var masked_scores(Var proj) {
  Tensor s = Tensor::row_vector(masked_scores(proj.value()));
  return proj.tape->record(std::move(s), {proj}, [proj](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& p = t.value(proj.id);
    const Tensor& s = t.value(self);
    Tensor gp(p.rows(), p.cols());
    const double n = static_cast<double>(p.rows());
    for (std::size_t d = 0; d < p.cols(); ++d) {
      double denom = 0.0;
      for (std::size_t l = 0; l < p.rows(); ++l) denom += std::abs(p(l, d));
      for (std::size_t l = 0; l < p.rows(); ++l) {
        const double x = p(l, d);
        if (denom < kDegenerateColumn) {
          gp(l, d) = g[d] / n;
        } else {
          // d/dx of sum|x|x / sum|x| = (2|x| - s sign(x)) / sum|x|
          const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
          gp(l, d) = g[d] * (2.0 * std::abs(x) - s[d] * sign) / denom;
        }
      }
    }
    t.accumulate(proj.id, gp);
  }, "masked_scores");
}

/// norm(sum_l (M o p)^[l]) with norm = softmax.
inline std::vector<double> node_level_prediction(const Tensor& proj) {
  return kernels::softmax_rows(Tensor::row_vector(masked_scores(proj))).vec();
}

inline Var node_level_prediction(Var proj) { return ops::softmax_rows(masked_scores(proj)); }

// ---------------------------------------------------------------------------------------------
// Prototype matching

/// Elementwise e^(v^lambda).
inline std::vector<double> epow(std::span<const double> v, int lambda) {
  if (lambda < 1) fail(Errc::InvalidConfig, "epow exponent must be >= 1");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(ops::ipow(v[i], lambda));
  return out;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Per node, the index of the most cosine-similar prototype if that similarity is >= beta,
/// else -1. Ties go to the lowest prototype index.
inline std::vector<int> assign_prototypes(const Tensor& node_reprs, const Tensor& centers, double beta) {
  std::vector<int> out(node_reprs.rows(), -1);
  if (centers.rows() == 0) return out;
  if (centers.cols() != node_reprs.cols()) fail(Errc::DimMismatch, "prototype width != node width");
  for (std::size_t l = 0; l < node_reprs.rows(); ++l) {
    int best = 0;
    double best_sim = cosine(node_reprs.row(l), centers.row(0));
    for (std::size_t j = 1; j < centers.rows(); ++j) {
      const double sim = cosine(node_reprs.row(l), centers.row(j));
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<int>(j);
      }
    }
    if (best_sim >= beta) out[l] = best;
  }
  return out;
}

/// Rows w_l: o_{j*} for matched nodes, zero otherwise.
inline Tensor assign_w(const Tensor& node_reprs, const Tensor& centers, const Tensor& outputs, double beta) {
  if (centers.rows() != outputs.rows()) fail(Errc::DimMismatch, "C* and O not aligned");
  const auto match = assign_prototypes(node_reprs, centers, beta);
  Tensor w(node_reprs.rows(), outputs.cols());
  for (std::size_t l = 0; l < match.size(); ++l)
    if (match[l] >= 0) {
      const auto o = outputs.row(static_cast<std::size_t>(match[l]));
      std::copy(o.begin(), o.end(), w.row(l).begin());
    }
  return w;
}

/// (1/|V|) sum_l w_l as a 1 x |C*| selector row times O (differentiable in O only).
inline Tensor match_selector(const std::vector<int>& match, std::size_t prototype_count) {
  Tensor sel(1, prototype_count);
  const double inv = 1.0 / static_cast<double>(match.size());
  for (int j : match)
    if (j >= 0) sel[static_cast<std::size_t>(j)] += inv;
  return sel;
}

inline std::vector<double> mean_w(const std::vector<int>& match, const Tensor& outputs) {
  return kernels::matmul(match_selector(match, outputs.rows()), outputs).vec();
}

/// One sample's L_v term: sum_k -((mean w)[class(Y^k)])^lambda. Gradient flows into O only.
template <class Out>
Var loss_v_sample(Tape& tape, const std::vector<int>& match, Out& outputs, const CandidateLabelSet& y, int lambda) {
  if (outputs.value.cols() != static_cast<std::size_t>(y.num_classes)) fail(Errc::DimMismatch, "O width != D");
  Var sel = tape.constant(match_selector(match, outputs.value.rows()));
  Var mw = ops::matmul(sel, tape.param(outputs));
  Tensor counts(1, static_cast<std::size_t>(y.num_classes));
  for (int c : y.labels) counts[static_cast<std::size_t>(c)] += 1.0;
  return ops::scale(ops::sum_all(ops::elementwise_mul(ops::scalar_pow(mw, lambda), tape.constant(counts))), -1.0);
}

/// Closed form of one L_v term for checking: sum_k -(mean_w[c_k])^lambda.
inline double loss_v_value(std::span<const double> mean_w_row, const CandidateLabelSet& y, int lambda) {
  double total = 0.0;
  for (int c : y.labels) total -= ops::ipow(mean_w_row[static_cast<std::size_t>(c)], lambda);
  return total;
}

/// One sample's L_g term: H(softmax(mean w), node_level_prediction) with a constant target.
inline Var loss_g_sample(Var node_pred, std::span<const double> mean_w_row) {
  const auto target = kernels::softmax_rows(Tensor::row_vector(mean_w_row));
  return cross_entropy(node_pred, target.data());
}

// ---------------------------------------------------------------------------------------------
// Batch-level losses

/// Mean over samples of the per-sample candidate CE of the node-level prediction.
template <class Enc, class Head>
Var loss_o(Tape& tape, std::span<const PLLSample* const> batch, Enc& enc, Head& head) {
  if (batch.empty()) fail(Errc::InvalidConfig, "empty batch");
  Var total = tape.constant(Tensor(1, 1));
  for (const PLLSample* s : batch) {
    Var proj = node_project(tape, encode_nodes(tape, s->graph, enc), head);
    total = ops::add(total, ce_candidates(node_level_prediction(proj), s->candidates));
  }
  return ops::scale(total, 1.0 / static_cast<double>(batch.size()));
}

/// Mean over samples of the candidate CE of the graph classifier.
template <class M>
Var loss_ce(Tape& tape, std::span<const PLLSample* const> batch, M& model) {
  if (batch.empty()) fail(Errc::InvalidConfig, "empty batch");
  Var total = tape.constant(Tensor(1, 1));
  for (const PLLSample* s : batch) total = ops::add(total, ce_candidates(graph_predict(tape, s->graph, model), s->candidates));
  return ops::scale(total, 1.0 / static_cast<double>(batch.size()));
}

/// Sum over samples of L_v terms, given each sample's node-to-prototype matches.
template <class Out>
Var loss_v(Tape& tape, std::span<const PLLSample* const> batch, Out& outputs,
           const std::vector<std::vector<int>>& matches, int lambda) {
  Var total = tape.constant(Tensor(1, 1));
  for (std::size_t i = 0; i < batch.size(); ++i)
    total = ops::add(total, loss_v_sample(tape, matches[i], outputs, batch[i]->candidates, lambda));
  return total;
}

/// Sum over samples of L_g terms; targets come from the (fixed) matched outputs.
template <class Enc, class Head>
Var loss_g(Tape& tape, std::span<const PLLSample* const> batch, const Tensor& outputs,
           const std::vector<std::vector<int>>& matches, Enc& enc, Head& head) {
  Var total = tape.constant(Tensor(1, 1));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Var proj = node_project(tape, encode_nodes(tape, batch[i]->graph, enc), head);
    total = ops::add(total, loss_g_sample(node_level_prediction(proj), mean_w(matches[i], outputs)));
  }
  return total;
}

}  // namespace gpcd
