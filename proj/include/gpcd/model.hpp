#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gpcd/autodiff.hpp"
#include "gpcd/error.hpp"
#include "gpcd/graph.hpp"
#include "gpcd/rng.hpp"

namespace gpcd {

struct ModelDims {
  std::size_t feature_dim = 8;
  int num_classes = 3;
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::size_t head_hidden = 32;
  std::size_t classifier_hidden = 32;

  std::size_t node_dim() const { return encoder_hidden.empty() ? feature_dim : encoder_hidden.back(); }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// One mean-aggregation message-passing layer: relu(h W_self + mean_nb(h) W_neigh + b).
struct EncoderLayer {
  Parameter w_self;
  Parameter w_neigh;
  Parameter bias;
};

/// Node encoder (psi).
struct EncoderParams {
  std::vector<EncoderLayer> layers;
};

/// Two-layer perceptron: relu(x W1 + b1) W2 + b2, followed by the owner's output map.
struct MlpParams {
  Parameter w1, b1, w2, b2;
};

/// Node projection head (delta-bar); output passes through tanh.
struct NodeHeadParams : MlpParams {};

/// Graph classifier (f) over the pooled node representation; output passes through softmax.
struct ClassifierParams : MlpParams {};

struct Model {
  ModelDims dims;
  EncoderParams encoder;
  NodeHeadParams head;
  ClassifierParams classifier;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : encoder.layers) out.insert(out.end(), {&l.w_self, &l.w_neigh, &l.bias});
    out.insert(out.end(), {&head.w1, &head.b1, &head.w2, &head.b2});
    out.insert(out.end(), {&classifier.w1, &classifier.b1, &classifier.w2, &classifier.b2});
    return out;
  }
  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    for (Parameter* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
    return out;
  }
};

namespace detail {

inline Parameter glorot(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor w(in, out);
  for (double& x : w.data()) x = u(rng);
  return Parameter(name, std::move(w));
}

inline Parameter zeros(const std::string& name, std::size_t cols) { return Parameter(name, Tensor(1, cols)); }

inline void init_mlp(MlpParams& m, const std::string& prefix, std::size_t in, std::size_t hidden,
                     std::size_t out, Rng& rng) {
  m.w1 = glorot(prefix + ".w1", in, hidden, rng);
  m.b1 = zeros(prefix + ".b1", hidden);
  m.w2 = glorot(prefix + ".w2", hidden, out, rng);
  m.b2 = zeros(prefix + ".b2", out);
}

}  // namespace detail

/// Glorot-uniform weights and zero biases, deterministic in `seed`.
inline Model init_model(const ModelDims& dims, std::uint64_t seed) {
  if (dims.encoder_hidden.empty()) fail(Errc::InvalidConfig, "encoder needs at least one layer");
  if (dims.num_classes < 1 || dims.feature_dim == 0) fail(Errc::InvalidConfig, "bad model dims");
  Model m;
  m.dims = dims;
  Rng rng = make_rng(seed, 0x6d6f64656cULL);
  std::size_t in = dims.feature_dim;
  for (std::size_t j = 0; j < dims.encoder_hidden.size(); ++j) {
    const std::size_t out = dims.encoder_hidden[j];
    const std::string p = "encoder." + std::to_string(j);
    m.encoder.layers.push_back(
        {detail::glorot(p + ".w_self", in, out, rng), detail::glorot(p + ".w_neigh", in, out, rng),
         detail::zeros(p + ".bias", out)});
    in = out;
  }
  const auto d = static_cast<std::size_t>(dims.num_classes);
  detail::init_mlp(m.head, "head", in, dims.head_hidden, d, rng);
  detail::init_mlp(m.classifier, "classifier", in, dims.classifier_hidden, d, rng);
  return m;
}

// Forward passes. `Enc`/`Head`/`Clf` may be const (parameters enter the tape as constants)
// or mutable (parameters receive gradients on a training tape).

template <class Enc>
Var encode_nodes(Tape& tape, const Graph& g, Enc& enc) {
  if (enc.layers.empty()) fail(Errc::DimMismatch, "encoder has no layers");
  if (enc.layers.front().w_self.value.rows() != g.feature_dim())
    fail(Errc::DimMismatch, "graph feature dim " + std::to_string(g.feature_dim()) + " vs encoder input " +
                                std::to_string(enc.layers.front().w_self.value.rows()));
  Var h = tape.constant(g.node_features());
  const Var adj = tape.constant(g.mean_adjacency());
  for (auto& layer : enc.layers) {
    Var self_term = ops::matmul(h, tape.param(layer.w_self));
    Var neigh_term = ops::matmul(ops::matmul(adj, h), tape.param(layer.w_neigh));
    h = ops::relu(ops::add_row(ops::add(self_term, neigh_term), tape.param(layer.bias)));
  }
  return h;
}

template <class Mlp>
Var mlp_logits(Tape& tape, Var x, Mlp& m) {
  if (x.cols() != m.w1.value.rows())
    fail(Errc::DimMismatch, "input width " + std::to_string(x.cols()) + " vs " + std::to_string(m.w1.value.rows()));
  Var hidden = ops::relu(ops::add_row(ops::matmul(x, tape.param(m.w1)), tape.param(m.b1)));
  return ops::add_row(ops::matmul(hidden, tape.param(m.w2)), tape.param(m.b2));
}

/// delta-bar: per-row MLP with tanh output, |V| x H -> |V| x D in (-1, 1).
template <class Head>
Var node_project(Tape& tape, Var node_reprs, Head& head) {
  return ops::tanh(mlp_logits(tape, node_reprs, head));
}

/// f's head on the pooled representation: 1 x H -> 1 x D probability row.
template <class Clf>
Var classify_pooled(Tape& tape, Var pooled, Clf& clf) {
  return ops::softmax_rows(mlp_logits(tape, pooled, clf));
}

template <class M>
Var graph_predict(Tape& tape, const Graph& g, M& model) {
  return classify_pooled(tape, ops::mean_rows(encode_nodes(tape, g, model.encoder)), model.classifier);
}

// Untracked conveniences.

inline Tensor encode_nodes(const Graph& g, const EncoderParams& enc) {
  Tape tape(Tape::Mode::Inference);
  return encode_nodes(tape, g, enc).value();
}

inline Tensor node_project(const Tensor& node_reprs, const NodeHeadParams& head) {
  Tape tape(Tape::Mode::Inference);
  return node_project(tape, tape.constant(node_reprs), head).value();
}

inline std::vector<double> graph_predict(const Graph& g, const Model& model) {
  Tape tape(Tape::Mode::Inference);
  return graph_predict(tape, g, model).value().vec();
}

/// Index of the largest entry; ties resolve to the lowest index.
inline int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace gpcd
