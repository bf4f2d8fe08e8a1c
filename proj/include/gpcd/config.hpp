#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gpcd/error.hpp"
#include "gpcd/model.hpp"
#include "gpcd/synthetic.hpp"

namespace gpcd {

enum class NoiseKind { Random, Annotator, Competitive };

struct NoiseConfig {
  NoiseKind kind = NoiseKind::Random;
  int k = 2;
  std::vector<double> accuracies{1.0, 0.7, 0.5};
  double rho = 0.9;
  std::vector<int> semantic_order;  // empty: class-index order
};

struct DataConfig {
  std::size_t n_train = 500;
  std::size_t n_val = 100;
  std::size_t n_test = 100;
  int num_classes = 3;
  std::size_t causal_nodes = 3;
  std::size_t noise_nodes = 7;
  std::size_t feature_dim = 8;
  double margin = 4.0;
  double edge_prob = 0.3;
  double noise_std = 1.0;
  NoiseConfig noise;
};

struct TrainConfig {
  std::size_t pretrain_epochs = 5;   // mu
  std::size_t aux_epochs = 20;
  int lambda = 4;
  double delta0 = 0.15;
  double delta_step = 0.05;
  double delta_cap = 0.9;
  double beta = 0.7;
  double alpha = 0.28;
  std::size_t period = 4;            // t: epochs between extractions
  std::size_t max_extraction_rounds = 5;
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  double w_ce = 1.0;
  double w_o = 1.0;
  double w_v = 1.0;
  double w_g = 0.5;
  std::size_t kmeans_max_iters = 100;
  std::size_t elbow_k_step = 10;
  std::size_t elbow_max_k = 101;     // 0: bounded only by the point count
  std::uint64_t seed = 0;

  std::size_t total_epochs() const { return pretrain_epochs + aux_epochs; }
};

struct ExperimentConfig {
  DataConfig data;
  ModelDims model;
  TrainConfig train;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  auto bad = [](const std::string& what) { fail(Errc::InvalidConfig, what); };
  if (c.pretrain_epochs < 1) bad("pretrain_epochs must be >= 1");
  if (c.period < 1) bad("period must be >= 1");
  if (c.lambda < 1 || c.lambda > 7) bad("lambda must be in 1..7");
  if (!(c.beta > 0.0 && c.beta < 1.0)) bad("beta must be in (0,1)");
  if (!(c.alpha > 0.0)) bad("alpha must be positive");
  if (!(c.delta0 > 0.0 && c.delta0 < 1.0)) bad("delta0 must be in (0,1)");
  if (!(c.delta_step >= 0.0)) bad("delta_step must be non-negative");
  if (!(c.delta_cap > 0.0 && c.delta_cap < 1.0)) bad("delta_cap must be in (0,1)");
  if (!(c.lr > 0.0)) bad("lr must be positive");
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (c.elbow_k_step < 1) bad("elbow_k_step must be >= 1");
  for (double w : {c.w_ce, c.w_o, c.w_v, c.w_g})
    if (!(w >= 0.0)) bad("loss weights must be non-negative");
}

inline PlantedConfig planted_config(const DataConfig& d, std::uint64_t seed) {
  PlantedConfig p;
  p.n_samples = d.n_train + d.n_val + d.n_test;
  p.num_classes = d.num_classes;
  p.causal_nodes = d.causal_nodes;
  p.noise_nodes = d.noise_nodes;
  p.feature_dim = d.feature_dim;
  p.margin = d.margin;
  p.edge_prob = d.edge_prob;
  p.noise_std = d.noise_std;
  p.seed = seed;
  return p;
}

inline std::string noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::Random: return "random";
    case NoiseKind::Annotator: return "annotator";
    case NoiseKind::Competitive: return "competitive";
  }
  return "random";
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "random") return NoiseKind::Random;
  if (s == "annotator") return NoiseKind::Annotator;
  if (s == "competitive") return NoiseKind::Competitive;
  fail(Errc::InvalidConfig, "unknown noise kind '" + s + "'");
}

namespace detail {

/// Reads known keys from an object and rejects any it does not know.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(Errc::InvalidConfig, where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(Errc::InvalidConfig, where_ + "." + key + " has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(Errc::InvalidConfig, "unknown key " + where_ + "." + it.key());
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& d = c.data;
  const auto& t = c.train;
  nlohmann::json noise = {{"kind", noise_kind_name(d.noise.kind)},
                          {"k", d.noise.k},
                          {"accuracies", d.noise.accuracies},
                          {"rho", d.noise.rho},
                          {"semantic_order", d.noise.semantic_order}};
  return {
      {"seed", c.seed},
      {"data",
       {{"n_train", d.n_train}, {"n_val", d.n_val}, {"n_test", d.n_test}, {"num_classes", d.num_classes},
        {"causal_nodes", d.causal_nodes}, {"noise_nodes", d.noise_nodes}, {"feature_dim", d.feature_dim},
        {"margin", d.margin}, {"edge_prob", d.edge_prob}, {"noise_std", d.noise_std}, {"noise", noise}}},
      {"model",
       {{"encoder_hidden", c.model.encoder_hidden},
        {"head_hidden", c.model.head_hidden},
        {"classifier_hidden", c.model.classifier_hidden}}},
      {"train",
       {{"pretrain_epochs", t.pretrain_epochs}, {"aux_epochs", t.aux_epochs}, {"lambda", t.lambda},
        {"delta0", t.delta0}, {"delta_step", t.delta_step}, {"delta_cap", t.delta_cap}, {"beta", t.beta},
        {"alpha", t.alpha}, {"period", t.period}, {"max_extraction_rounds", t.max_extraction_rounds},
        {"lr", t.lr}, {"adam_beta1", t.adam_beta1}, {"adam_beta2", t.adam_beta2}, {"adam_eps", t.adam_eps},
        {"batch_size", t.batch_size}, {"w_ce", t.w_ce}, {"w_o", t.w_o}, {"w_v", t.w_v}, {"w_g", t.w_g},
        {"kmeans_max_iters", t.kmeans_max_iters}, {"elbow_k_step", t.elbow_k_step},
        {"elbow_max_k", t.elbow_max_k}}},
  };
}

/// Missing keys keep their defaults; unknown keys are an error.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::Reader top(j, "config");
  top.get("seed", c.seed);
  if (const auto* dj = top.child("data")) {
    detail::Reader r(*dj, "data");
    auto& d = c.data;
    r.get("n_train", d.n_train);
    r.get("n_val", d.n_val);
    r.get("n_test", d.n_test);
    r.get("num_classes", d.num_classes);
    r.get("causal_nodes", d.causal_nodes);
    r.get("noise_nodes", d.noise_nodes);
    r.get("feature_dim", d.feature_dim);
    r.get("margin", d.margin);
    r.get("edge_prob", d.edge_prob);
    r.get("noise_std", d.noise_std);
    if (const auto* nj = r.child("noise")) {
      detail::Reader n(*nj, "data.noise");
      std::string kind = noise_kind_name(d.noise.kind);
      n.get("kind", kind);
      d.noise.kind = parse_noise_kind(kind);
      n.get("k", d.noise.k);
      n.get("accuracies", d.noise.accuracies);
      n.get("rho", d.noise.rho);
      n.get("semantic_order", d.noise.semantic_order);
      n.finish();
    }
    r.finish();
  }
  if (const auto* mj = top.child("model")) {
    detail::Reader r(*mj, "model");
    r.get("encoder_hidden", c.model.encoder_hidden);
    r.get("head_hidden", c.model.head_hidden);
    r.get("classifier_hidden", c.model.classifier_hidden);
    r.finish();
  }
  if (const auto* tj = top.child("train")) {
    detail::Reader r(*tj, "train");
    auto& t = c.train;
    r.get("pretrain_epochs", t.pretrain_epochs);
    r.get("aux_epochs", t.aux_epochs);
    r.get("lambda", t.lambda);
    r.get("delta0", t.delta0);
    r.get("delta_step", t.delta_step);
    r.get("delta_cap", t.delta_cap);
    r.get("beta", t.beta);
    r.get("alpha", t.alpha);
    r.get("period", t.period);
    r.get("max_extraction_rounds", t.max_extraction_rounds);
    r.get("lr", t.lr);
    r.get("adam_beta1", t.adam_beta1);
    r.get("adam_beta2", t.adam_beta2);
    r.get("adam_eps", t.adam_eps);
    r.get("batch_size", t.batch_size);
    r.get("w_ce", t.w_ce);
    r.get("w_o", t.w_o);
    r.get("w_v", t.w_v);
    r.get("w_g", t.w_g);
    r.get("kmeans_max_iters", t.kmeans_max_iters);
    r.get("elbow_k_step", t.elbow_k_step);
    r.get("elbow_max_k", t.elbow_max_k);
    r.finish();
  }
  top.finish();
  c.model.feature_dim = c.data.feature_dim;
  c.model.num_classes = c.data.num_classes;
  c.train.seed = c.seed;
  validate(c.train);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open config '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::FormatError, std::string("config: ") + e.what());
  }
}

}  // namespace gpcd
