#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gpcd/adam.hpp"
#include "gpcd/cause_discovery.hpp"
#include "gpcd/config.hpp"
#include "gpcd/losses.hpp"
#include "gpcd/model.hpp"
#include "gpcd/pll_noise.hpp"
#include "gpcd/synthetic.hpp"

namespace gpcd {

enum class Method { Gpcd, WoLambda, WoAuxiliary, BaselineCe };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Gpcd: return "gpcd";
    case Method::WoLambda: return "gpcd_wo_lambda";
    case Method::WoAuxiliary: return "gpcd_wo_auxiliary";
    case Method::BaselineCe: return "baseline_ce";
  }
  return "gpcd";
}

struct EvalResult {
  double accuracy = 0.0;
  double candidate_loss = 0.0;  // mean candidate CE of f
};

/// Accuracy of argmax f(G) against the ground truth; never looks at candidates for accuracy.
inline EvalResult evaluate(const Dataset& ds, const Model& model) {
  EvalResult r;
  if (ds.samples.empty()) return r;
  std::size_t correct = 0;
  for (const auto& s : ds.samples) {
    const auto pred = graph_predict(s.graph, model);
    if (argmax(pred) == s.ground_truth) ++correct;
    r.candidate_loss += ce_candidates(pred, s.candidates);
  }
  const auto n = static_cast<double>(ds.samples.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.candidate_loss /= n;
  return r;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based across both phases
  std::string phase;      // "pretrain" | "auxiliary" | "train"
  double loss = 0.0;      // mean weighted batch loss
  double l_ce = 0.0, l_o = 0.0, l_v = 0.0, l_g = 0.0;
  double train_acc = 0.0, val_acc = 0.0, test_acc = 0.0;
  double val_loss = 0.0;
  std::size_t prototypes = 0;
  double delta = 0.0;
};

struct ExtractionRecord {
  std::size_t round = 0;
  std::size_t epoch = 0;  // the epoch whose start triggered it
  double delta = 0.0;
  std::size_t clusters = 0;
  double amse = 0.0;
  std::size_t selected = 0;
};

struct RunResult {
  std::string method;
  std::vector<EpochRecord> epochs;
  std::vector<ExtractionRecord> extractions;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc = 0.0;        // at best_epoch
  double final_test_acc = 0.0;
  std::optional<RecoveryStats> recovery;
  std::size_t clamp_events = 0;
  double wall_seconds = 0.0;    // informational; not part of deterministic summaries
  Model model;
  std::optional<PrototypeSet> prototypes;
};

struct LossSwitches {
  bool ce = true;
  bool o = true;
  bool aux = false;
};

namespace detail {

struct BatchTotals {
  double loss = 0, ce = 0, o = 0, v = 0, g = 0;
  std::size_t batches = 0;
};

inline AdamConfig adam_of(const TrainConfig& c) { return {c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps}; }

/// One pass over shuffled mini-batches. Returns per-batch means of each loss term.
inline BatchTotals train_epoch(Model& model, PrototypeSet* protos, const Dataset& train, const TrainConfig& cfg,
                               LossSwitches sw, int lambda, std::size_t epoch, std::size_t& clamps) {
  std::vector<std::size_t> order(train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(cfg.seed, 0x7368756666ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);

  const bool aux = sw.aux && protos != nullptr && !protos->empty();
  std::vector<Parameter*> params = model.parameters();
  if (aux) params.push_back(&protos->outputs);
  const AdamConfig adam = adam_of(cfg);

  BatchTotals tot;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    const double n = static_cast<double>(end - start);
    zero_grads(params);
    Tape tape;
    Var lce = tape.constant(Tensor(1, 1)), lo = lce, lv = lce, lg = lce;
    for (std::size_t b = start; b < end; ++b) {
      const PLLSample& s = train.samples[order[b]];
      Var h = encode_nodes(tape, s.graph, model.encoder);
      if (sw.ce) lce = ops::add(lce, ce_candidates(classify_pooled(tape, ops::mean_rows(h), model.classifier), s.candidates));
      if (sw.o || aux) {
        Var nlp = node_level_prediction(node_project(tape, h, model.head));
        if (sw.o) lo = ops::add(lo, ce_candidates(nlp, s.candidates));
        if (aux) {
          const auto match = assign_prototypes(h.value(), protos->centers, cfg.beta);
          lv = ops::add(lv, loss_v_sample(tape, match, protos->outputs, s.candidates, lambda));
          lg = ops::add(lg, loss_g_sample(nlp, mean_w(match, protos->outputs.value)));
        }
      }
    }
    lce = ops::scale(lce, 1.0 / n);
    lo = ops::scale(lo, 1.0 / n);
    Var total = ops::add(ops::scale(lce, sw.ce ? cfg.w_ce : 0.0), ops::scale(lo, sw.o ? cfg.w_o : 0.0));
    if (aux) total = ops::add(total, ops::add(ops::scale(lv, cfg.w_v), ops::scale(lg, cfg.w_g)));
    tape.backward(total);
    adam_step(params, adam);
    if (aux) clamp_outputs(*protos);
    clamps += tape.clamp_events();

    tot.loss += total.scalar();
    tot.ce += lce.scalar();
    tot.o += lo.scalar();
    tot.v += lv.scalar();
    tot.g += lg.scalar();
    ++tot.batches;
  }
  if (tot.batches > 0) {
    const double k = static_cast<double>(tot.batches);
    tot.loss /= k;
    tot.ce /= k;
    tot.o /= k;
    tot.v /= k;
    tot.g /= k;
  }
  return tot;
}

}  // namespace detail

/// Datasets one run trains and evaluates on.
struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

struct RunOptions {
  Method method = Method::Gpcd;
  bool recovery = true;  // cause-recovery stats on the test split (needs masks)
};

/// Single entry point for all methods. GPCD: mu pre-training epochs on L_ce + L_o, then aux
/// epochs with cause extraction every `period` epochs (up to max_extraction_rounds) and the
/// full objective. Ablations and the baseline spend the same total epoch budget.
inline RunResult run_method(const Splits& data, const ModelDims& dims, const TrainConfig& cfg, RunOptions opt = {}) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.method = method_name(opt.method);
  res.model = init_model(dims, sub_seed(cfg.seed, 1));
  const int lambda = opt.method == Method::WoLambda ? 1 : cfg.lambda;
  const bool has_aux = opt.method == Method::Gpcd || opt.method == Method::WoLambda;

  std::optional<PrototypeSet> protos;
  std::size_t round = 0;
  const std::size_t total = cfg.total_epochs();
  for (std::size_t e = 0; e < total; ++e) {
    EpochRecord rec;
    rec.epoch = e + 1;
    LossSwitches sw;
    if (opt.method == Method::BaselineCe) {
      sw = {true, false, false};
      rec.phase = "train";
    } else if (!has_aux || e < cfg.pretrain_epochs) {
      sw = {true, true, false};
      rec.phase = has_aux ? "pretrain" : "train";
    } else {
      sw = {true, true, true};
      rec.phase = "auxiliary";
      const std::size_t a = e - cfg.pretrain_epochs;
      if (a % cfg.period == 0 && round < cfg.max_extraction_rounds) {
        const double delta = delta_schedule(round, {cfg.delta0, cfg.delta_step, cfg.delta_cap});
        ElbowOptions eo;
        eo.alpha = cfg.alpha;
        eo.k_step = cfg.elbow_k_step;
        eo.max_iters = cfg.kmeans_max_iters;
        eo.max_k = cfg.elbow_max_k;
        eo.seed = sub_seed(cfg.seed, 0x636c7573ULL + round);
        Extraction ex = extract(data.train, res.model, eo, delta, round);
        res.extractions.push_back({round, e + 1, delta, ex.clusters, ex.amse, ex.prototypes.size()});
        protos = std::move(ex.prototypes);
        ++round;
      }
    }
    if (protos) {
      rec.prototypes = protos->size();
      rec.delta = protos->delta_used;
    }
    const auto tot = detail::train_epoch(res.model, protos ? &*protos : nullptr, data.train, cfg, sw, lambda, e,
                                         res.clamp_events);
    rec.loss = tot.loss;
    rec.l_ce = tot.ce;
    rec.l_o = tot.o;
    rec.l_v = tot.v;
    rec.l_g = tot.g;
    rec.train_acc = evaluate(data.train, res.model).accuracy;
    const auto val = evaluate(data.validation, res.model);
    rec.val_acc = val.accuracy;
    rec.val_loss = val.candidate_loss;
    rec.test_acc = evaluate(data.test, res.model).accuracy;
    if (res.epochs.empty() || rec.val_acc > res.best_val_acc) {
      res.best_val_acc = rec.val_acc;
      res.best_epoch = rec.epoch;
      res.test_acc = rec.test_acc;
    }
    res.epochs.push_back(std::move(rec));
  }
  if (!res.epochs.empty()) res.final_test_acc = res.epochs.back().test_acc;
  if (opt.recovery && !data.test.samples.empty() && data.test.samples.front().causal_mask)
    res.recovery = cause_recovery(data.test, res.model);
  res.prototypes = std::move(protos);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline RunResult run_gpcd(const Splits& d, const ModelDims& m, const TrainConfig& c) {
  return run_method(d, m, c, {Method::Gpcd});
}

inline RunResult run_baseline_ce(const Splits& d, const ModelDims& m, const TrainConfig& c) {
  return run_method(d, m, c, {Method::BaselineCe});
}

enum class Ablation { WoLambda, WoAuxiliary };

inline RunResult run_ablation(const Splits& d, const ModelDims& m, const TrainConfig& c, Ablation which) {
  return run_method(d, m, c, {which == Ablation::WoLambda ? Method::WoLambda : Method::WoAuxiliary});
}

// ---------------------------------------------------------------------------------------------
// Data assembly

inline Dataset apply_noise(const Dataset& ds, const NoiseConfig& n, std::uint64_t seed) {
  switch (n.kind) {
    case NoiseKind::Random: return add_random_pll(ds, n.k, seed);
    case NoiseKind::Annotator: return add_annotator_pll(ds, n.accuracies, seed);
    case NoiseKind::Competitive:
      return add_competitive_pll(ds, n.semantic_order.empty() ? identity_order(ds.num_classes) : n.semantic_order,
                                 n.rho, seed);
  }
  return ds;
}

/// Planted dataset with noisy candidates, split train/validation/test by the configured counts.
inline Splits make_splits(const DataConfig& d, std::uint64_t seed) {
  const Dataset clean = gen_planted_dataset(planted_config(d, sub_seed(seed, 0x64617461ULL)));
  const Dataset noisy = apply_noise(clean, d.noise, sub_seed(seed, 0x6e6f697365ULL));
  auto parts = split_by_counts(noisy, d.n_train, d.n_val, d.n_test);
  return {std::move(parts.train), std::move(parts.validation), std::move(parts.test)};
}

// ---------------------------------------------------------------------------------------------
// Oracle pruning

inline Dataset prune_to_causal(const Dataset& ds) {
  Dataset out = ds;
  for (auto& s : out.samples) {
    if (!s.causal_mask) fail(Errc::MissingCausalMask, "sample without causal mask");
    s.graph = induced_subgraph(s.graph, *s.causal_mask);
    s.causal_mask = std::vector<bool>(s.graph.node_count(), true);
  }
  return out;
}

inline Dataset with_true_labels(const Dataset& ds) {
  Dataset out = ds;
  for (auto& s : out.samples) s.candidates = CandidateLabelSet{{s.ground_truth}, ds.num_classes};
  out.candidate_count = 1;
  return out;
}

struct OraclePruneResult {
  RunResult full_pll;      // (a)
  RunResult pruned_pll;    // (b)
  RunResult supervised;    // (c)
};

/// Three L_ce-only models with identical budgets: full graphs + candidates, causal-only graphs
/// + candidates (all splits pruned), full graphs + ground-truth labels.
inline OraclePruneResult oracle_prune_experiment(const Splits& d, const ModelDims& dims, const TrainConfig& cfg) {
  for (const Dataset* ds : {&d.train, &d.validation, &d.test})
    for (const auto& s : ds->samples)
      if (!s.causal_mask) fail(Errc::MissingCausalMask, "oracle pruning needs causal masks");
  const RunOptions opt{Method::BaselineCe, false};
  OraclePruneResult r;
  r.full_pll = run_method(d, dims, cfg, opt);
  r.full_pll.method = "full_pll";
  r.pruned_pll = run_method({prune_to_causal(d.train), prune_to_causal(d.validation), prune_to_causal(d.test)}, dims,
                            cfg, opt);
  r.pruned_pll.method = "pruned_pll";
  r.supervised = run_method({with_true_labels(d.train), d.validation, d.test}, dims, cfg, opt);
  r.supervised.method = "full_supervised";
  return r;
}

}  // namespace gpcd
