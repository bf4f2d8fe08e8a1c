#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpcd/gpcd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gpcd;

namespace {

struct Common {
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out = "out";
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  c.seed_opt = sub->add_option("--seed", c.seed, "RNG seed (overrides the config seed)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--config", c.config, "JSON experiment config");
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? config_from_json(json::object()) : load_config(c.config);
  if (c.seed_opt && c.seed_opt->count() > 0) {
    cfg.seed = c.seed;
    cfg.train.seed = c.seed;
  }
  return cfg;
}

ExperimentConfig with_seed(ExperimentConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
  return cfg;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write '" + p.string() + "'");
  out << s;
  if (!out) fail(Errc::IoError, "write failed for '" + p.string() + "'");
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// Elapsed time lives apart from summary.json so summaries stay byte-identical across reruns.
class Timer {
 public:
  explicit Timer(std::string name) : name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& what, double seconds) { laps_[what] = seconds; }
  void finish(const fs::path& dir) const {
    json j{{"subcommand", name_},
           {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count()}};
    if (!laps_.empty()) j["runs"] = laps_;
    write_json(dir / "timing.json", j);
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  json laps_ = json::object();
};

json epoch_json(const EpochRecord& r, const std::string& method, std::uint64_t seed) {
  return {{"method", method}, {"seed", seed},        {"epoch", r.epoch},         {"phase", r.phase},
          {"loss", r.loss},   {"l_ce", r.l_ce},      {"l_o", r.l_o},             {"l_v", r.l_v},
          {"l_g", r.l_g},     {"train_acc", r.train_acc}, {"val_acc", r.val_acc}, {"val_loss", r.val_loss},
          {"test_acc", r.test_acc}, {"prototypes", r.prototypes}, {"delta", r.delta}};
}

json run_json(const RunResult& r, std::uint64_t seed) {
  json j{{"method", r.method},
         {"seed", seed},
         {"epochs", r.epochs.size()},
         {"best_epoch", r.best_epoch},
         {"best_val_acc", r.best_val_acc},
         {"test_acc", r.test_acc},
         {"final_test_acc", r.final_test_acc},
         {"clamp_events", r.clamp_events}};
  if (r.recovery)
    j["cause_recovery"] = {{"precision", r.recovery->precision}, {"recall", r.recovery->recall},
                           {"graphs", r.recovery->graphs}};
  json ex = json::array();
  for (const auto& e : r.extractions)
    ex.push_back({{"round", e.round}, {"epoch", e.epoch}, {"delta", e.delta}, {"clusters", e.clusters},
                  {"amse", e.amse}, {"selected", e.selected}});
  j["extractions"] = ex;
  if (!r.epochs.empty()) j["final_loss"] = r.epochs.back().loss;
  return j;
}

// Appends one JSON line per epoch and one CSV row per epoch.
class RunSink {
 public:
  explicit RunSink(const fs::path& dir)
      : jsonl_(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc),
        csv_(dir / "curves.csv", std::ios::binary | std::ios::trunc) {
    if (!jsonl_ || !csv_) fail(Errc::IoError, "cannot open metrics files in '" + dir.string() + "'");
    csv_ << "method,seed,epoch,phase,loss,l_ce,l_o,l_v,l_g,train_acc,val_acc,test_acc,prototypes,delta\n";
  }

  void add(const RunResult& r, std::uint64_t seed) {
    for (const auto& e : r.epochs) {
      jsonl_ << epoch_json(e, r.method, seed).dump() << '\n';
      std::ostringstream row;
      row.precision(17);
      row << r.method << ',' << seed << ',' << e.epoch << ',' << e.phase << ',' << e.loss << ',' << e.l_ce << ','
          << e.l_o << ',' << e.l_v << ',' << e.l_g << ',' << e.train_acc << ',' << e.val_acc << ',' << e.test_acc
          << ',' << e.prototypes << ',' << e.delta << '\n';
      csv_ << row.str();
    }
  }

 private:
  std::ofstream jsonl_, csv_;
};

Splits load_splits(const std::string& dir) {
  const fs::path d(dir);
  return {load_dataset((d / "train.jsonl").string()), load_dataset((d / "val.jsonl").string()),
          load_dataset((d / "test.jsonl").string())};
}

Splits splits_for(const ExperimentConfig& cfg, const std::string& data_dir) {
  return data_dir.empty() ? make_splits(cfg.data, cfg.seed) : load_splits(data_dir);
}

ModelDims dims_for(const ExperimentConfig& cfg, const Splits& s) {
  ModelDims d = cfg.model;
  d.feature_dim = s.train.feature_dim;
  d.num_classes = s.train.num_classes;
  return d;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

json split_stats(const Dataset& ds) {
  std::vector<std::size_t> per_class(static_cast<std::size_t>(ds.num_classes), 0);
  std::size_t cand_total = 0;
  for (const auto& s : ds.samples) {
    ++per_class[static_cast<std::size_t>(s.ground_truth)];
    cand_total += s.candidates.size();
  }
  return {{"samples", ds.samples.size()},
          {"class_counts", per_class},
          {"mean_candidates", ds.samples.empty() ? 0.0 : static_cast<double>(cand_total) / ds.samples.size()},
          {"K", ds.candidate_count}};
}

// ---------------------------------------------------------------------------------------------

int cmd_gen_data(const Common& c) {
  Timer timer("gen-data");
  const ExperimentConfig cfg = resolve_config(c);
  const Splits s = make_splits(cfg.data, cfg.seed);
  const fs::path out(c.out);
  save_dataset(s.train, (out / "train.jsonl").string());
  save_dataset(s.validation, (out / "val.jsonl").string());
  save_dataset(s.test, (out / "test.jsonl").string());
  write_json(out / "config.json", to_json(cfg));
  write_json(out / "summary.json", {{"subcommand", "gen-data"},
                                    {"seed", cfg.seed},
                                    {"noise", noise_kind_name(cfg.data.noise.kind)},
                                    {"train", split_stats(s.train)},
                                    {"val", split_stats(s.validation)},
                                    {"test", split_stats(s.test)}});
  timer.finish(out);
  std::cout << "wrote " << s.train.samples.size() << "/" << s.validation.samples.size() << "/"
            << s.test.samples.size() << " samples to " << out.string() << "\n";
  return 0;
}

Method parse_method(const std::string& m) {
  for (Method x : {Method::Gpcd, Method::WoLambda, Method::WoAuxiliary, Method::BaselineCe})
    if (method_name(x) == m) return x;
  fail(Errc::InvalidConfig, "unknown method '" + m + "'");
}

// Runs `methods` for seeds seed, seed+1, ...; writes metrics, curves, summary.
int run_methods(const Common& c, const std::string& name, const std::vector<Method>& methods, std::size_t seeds,
                const std::string& data_dir, bool save_last_model) {
  Timer timer(name);
  const ExperimentConfig base = resolve_config(c);
  if (seeds < 1) fail(Errc::InvalidConfig, "--seeds must be >= 1");
  const fs::path out(c.out);
  RunSink sink(out);
  json runs = json::array();
  std::map<std::string, std::vector<double>> acc;
  std::map<std::string, std::vector<double>> prec;
  for (std::size_t i = 0; i < seeds; ++i) {
    const ExperimentConfig cfg = with_seed(base, base.seed + i);
    const Splits s = splits_for(cfg, data_dir);
    const ModelDims dims = dims_for(cfg, s);
    for (Method m : methods) {
      const RunResult r = run_method(s, dims, cfg.train, {m});
      sink.add(r, cfg.seed);
      runs.push_back(run_json(r, cfg.seed));
      acc[r.method].push_back(r.test_acc);
      if (r.recovery) prec[r.method].push_back(r.recovery->precision);
      timer.lap(r.method + "/" + std::to_string(cfg.seed), r.wall_seconds);
      std::cout << r.method << " seed " << cfg.seed << ": test_acc " << r.test_acc << " (best epoch " << r.best_epoch
                << ")\n";
      if (save_last_model && i + 1 == seeds && m == methods.back()) {
        save_model(r.model, (out / "model.json").string());
        if (r.prototypes) {
          json p = json::array();
          for (std::size_t j = 0; j < r.prototypes->size(); ++j)
            p.push_back({{"center", std::vector<double>(r.prototypes->centers.row(j).begin(),
                                                        r.prototypes->centers.row(j).end())},
                         {"output", std::vector<double>(r.prototypes->outputs.value.row(j).begin(),
                                                        r.prototypes->outputs.value.row(j).end())},
                         {"members", r.prototypes->member_counts[j]}});
          write_json(out / "prototypes.json", p);
        }
      }
    }
  }
  json agg = json::object();
  for (const auto& [m, v] : acc) {
    agg[m] = {{"mean_test_acc", mean(v)}, {"stderr_test_acc", std_error(v)}, {"runs", v.size()}};
    if (prec.count(m)) agg[m]["mean_cause_precision"] = mean(prec[m]);
  }
  write_json(out / "summary.json",
             {{"subcommand", name}, {"config", to_json(base)}, {"runs", runs}, {"aggregate", agg}});
  timer.finish(out);
  return 0;
}

int cmd_eval(const Common& c, const std::string& model_path, const std::string& data_dir) {
  Timer timer("eval");
  const ExperimentConfig cfg = resolve_config(c);
  const Splits s = splits_for(cfg, data_dir);
  const Model m = load_model(model_path);
  json j{{"subcommand", "eval"}, {"seed", cfg.seed}};
  const std::pair<const char*, const Dataset*> parts[] = {
      {"train", &s.train}, {"val", &s.validation}, {"test", &s.test}};
  for (const auto& [name, ds] : parts) {
    const EvalResult r = evaluate(*ds, m);
    j[name] = {{"accuracy", r.accuracy}, {"candidate_loss", r.candidate_loss}, {"samples", ds->samples.size()}};
    std::cout << name << " accuracy " << r.accuracy << "\n";
  }
  if (!s.test.samples.empty() && s.test.samples.front().causal_mask) {
    const RecoveryStats st = cause_recovery(s.test, m);
    j["cause_recovery"] = {{"precision", st.precision}, {"recall", st.recall}, {"graphs", st.graphs}};
  }
  const fs::path out(c.out);
  write_json(out / "summary.json", j);
  timer.finish(out);
  return 0;
}

// Fixed node-to-prototype matches and L_g targets, so the checked function is smooth.
struct AuxFixture {
  PrototypeSet protos;
  std::vector<std::vector<int>> matches;
  std::vector<std::vector<double>> targets;
  std::size_t matched_nodes = 0;
};

AuxFixture aux_fixture(const std::vector<const PLLSample*>& batch, const Model& m, const TrainConfig& t) {
  std::size_t total = 0;
  for (const auto* s : batch) total += s->graph.node_count();
  Tensor reprs(total, m.dims.node_dim());
  std::size_t at = 0;
  for (const auto* s : batch) {
    const Tensor h = encode_nodes(s->graph, m.encoder);
    for (std::size_t l = 0; l < h.rows(); ++l, ++at) std::copy(h.row(l).begin(), h.row(l).end(), reprs.row(at).begin());
  }
  const ClusterResult cl = kmeans(reprs, std::min<std::size_t>(4, total), t.kmeans_max_iters, t.seed);
  AuxFixture f;
  f.protos.centers = cl.centers;
  f.protos.outputs = Parameter("prototype.outputs", node_project(cl.centers, m.head));
  for (std::size_t j = 0; j < cl.k(); ++j) f.protos.cluster_ids.push_back(j);
  for (const auto* s : batch) {
    f.matches.push_back(assign_prototypes(encode_nodes(s->graph, m.encoder), f.protos.centers, t.beta));
    f.targets.push_back(kernels::softmax_rows(Tensor::row_vector(mean_w(f.matches.back(), f.protos.outputs.value))).vec());
    for (int j : f.matches.back()) f.matched_nodes += j >= 0;
  }
  return f;
}

int cmd_gradcheck(const Common& c, std::size_t probes) {
  Timer timer("gradcheck");
  const ExperimentConfig cfg = resolve_config(c);
  DataConfig small = cfg.data;
  small.n_train = 2;
  small.n_val = 0;
  small.n_test = 0;
  const Splits s = make_splits(small, cfg.seed);
  Model m = init_model(dims_for(cfg, s), sub_seed(cfg.seed, 1));
  const std::vector<const PLLSample*> batch{&s.train.samples[0], &s.train.samples[1]};
  const TrainConfig& t = cfg.train;
  GradcheckOptions opt;
  opt.probe_count = probes;
  opt.seed = cfg.seed;

  std::vector<Parameter*> params = m.parameters();
  const auto pre = gradcheck(
      [&](Tape& tape) {
        return ops::add(ops::scale(loss_ce(tape, batch, m), t.w_ce),
                        ops::scale(loss_o(tape, batch, m.encoder, m.head), t.w_o));
      },
      params, opt);

  AuxFixture f = aux_fixture(batch, m, t);
  std::vector<Parameter*> aux_params = params;
  aux_params.push_back(&f.protos.outputs);
  const auto aux = gradcheck(
      [&](Tape& tape) {
        Var total = ops::add(ops::scale(loss_ce(tape, batch, m), t.w_ce),
                             ops::scale(loss_o(tape, batch, m.encoder, m.head), t.w_o));
        Var lv = loss_v(tape, batch, f.protos.outputs, f.matches, t.lambda);
        Var lg = tape.constant(Tensor(1, 1));
        for (std::size_t i = 0; i < batch.size(); ++i) {
          Var nlp = node_level_prediction(node_project(tape, encode_nodes(tape, batch[i]->graph, m.encoder), m.head));
          lg = ops::add(lg, cross_entropy(nlp, f.targets[i]));
        }
        return ops::add(total, ops::add(ops::scale(lv, t.w_v), ops::scale(lg, t.w_g)));
      },
      aux_params, opt);

  const double tol = 1e-4;
  const json j{{"subcommand", "gradcheck"},
               {"seed", cfg.seed},
               {"batch_graphs", batch.size()},
               {"step", opt.step},
               {"tolerance", tol},
               {"pretrain", {{"max_rel_error", pre.max_rel_error}, {"probes", pre.probes},
                             {"kinks_skipped", pre.kinks_skipped}, {"pass", pre.max_rel_error < tol}}},
               {"auxiliary", {{"max_rel_error", aux.max_rel_error}, {"probes", aux.probes},
                              {"kinks_skipped", aux.kinks_skipped}, {"prototypes", f.protos.size()},
                              {"matched_nodes", f.matched_nodes}, {"pass", aux.max_rel_error < tol}}}};
  const fs::path out(c.out);
  write_json(out / "summary.json", j);
  timer.finish(out);
  std::cout << "pretrain max rel error " << pre.max_rel_error << ", auxiliary " << aux.max_rel_error << "\n";
  return pre.max_rel_error < tol && aux.max_rel_error < tol ? 0 : 1;
}

int cmd_causes(const Common& c, const std::string& model_path, const std::string& data_dir, std::size_t max_graphs) {
  Timer timer("causes");
  const ExperimentConfig cfg = resolve_config(c);
  const Splits s = splits_for(cfg, data_dir);
  Model model;
  PrototypeSet protos;
  if (model_path.empty()) {
    RunResult r = run_gpcd(s, dims_for(cfg, s), cfg.train);
    model = std::move(r.model);
    if (r.prototypes) protos = std::move(*r.prototypes);
  } else {
    model = load_model(model_path);
    ElbowOptions eo;
    eo.alpha = cfg.train.alpha;
    eo.k_step = cfg.train.elbow_k_step;
    eo.max_iters = cfg.train.kmeans_max_iters;
    eo.max_k = cfg.train.elbow_max_k;
    eo.seed = sub_seed(cfg.train.seed, 0x636c7573ULL);
    protos = extract(s.train, model, eo, cfg.train.delta0).prototypes;
  }

  json pj = json::array();
  for (std::size_t j = 0; j < protos.size(); ++j) {
    double norm = 0;
    for (double v : protos.centers.row(j)) norm += v * v;
    pj.push_back({{"cluster", protos.cluster_ids.empty() ? j : protos.cluster_ids[j]},
                  {"center_norm", std::sqrt(norm)},
                  {"output", std::vector<double>(protos.outputs.value.row(j).begin(), protos.outputs.value.row(j).end())},
                  {"members", protos.member_counts.empty() ? 0 : protos.member_counts[j]}});
  }
  const fs::path out(c.out);
  std::ofstream csv(out / "attributions.csv", std::ios::binary | std::ios::trunc);
  if (!csv) fail(Errc::IoError, "cannot write attributions.csv");
  csv << "graph,node,score,causal,top\n";
  csv.precision(17);
  json gj = json::array();
  const std::size_t n = std::min(max_graphs, s.test.samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& smp = s.test.samples[i];
    const auto score = node_attribution(smp.graph, model.encoder, model.head);
    std::size_t causal = 0;
    if (smp.causal_mask) causal = static_cast<std::size_t>(std::count(smp.causal_mask->begin(), smp.causal_mask->end(), true));
    const auto top = top_nodes(score, causal);
    json g{{"graph", i}, {"ground_truth", smp.ground_truth}, {"scores", score}, {"top", top}};
    if (smp.causal_mask) g["causal_mask"] = *smp.causal_mask;
    gj.push_back(g);
    for (std::size_t l = 0; l < score.size(); ++l)
      csv << i << ',' << l << ',' << score[l] << ',' << (smp.causal_mask ? int((*smp.causal_mask)[l]) : -1) << ','
          << int(std::find(top.begin(), top.end(), l) != top.end()) << '\n';
  }
  json j{{"subcommand", "causes"}, {"seed", cfg.seed}, {"prototypes", pj}, {"graphs", gj}};
  if (!s.test.samples.empty() && s.test.samples.front().causal_mask) {
    const RecoveryStats st = cause_recovery(s.test, model);
    j["cause_recovery"] = {{"precision", st.precision}, {"recall", st.recall}, {"graphs", st.graphs}};
  }
  write_json(out / "summary.json", j);
  timer.finish(out);
  std::cout << protos.size() << " prototypes; attributions for " << n << " test graphs\n";
  return 0;
}

// "0:1;0:2" -> {(truth 0, distractors {1}), (truth 0, distractors {2})}
std::vector<ProfileEntry> parse_profile(const std::string& text) {
  std::vector<ProfileEntry> out;
  std::stringstream all(text);
  std::string item;
  while (std::getline(all, item, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail(Errc::InvalidProfile, "profile entry '" + item + "' lacks ':'");
    ProfileEntry e;
    try {
      e.truth = std::stoi(item.substr(0, colon));
      std::stringstream ds(item.substr(colon + 1));
      std::string d;
      while (std::getline(ds, d, ',')) e.distractors.push_back(std::stoi(d));
    } catch (const std::logic_error&) {
      fail(Errc::InvalidProfile, "cannot parse profile entry '" + item + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

int cmd_theorem(const Common& c, int dims, const std::string& profile_text, int lo, int hi, double grid) {
  Timer timer("verify-theorem3");
  const auto profile = parse_profile(profile_text);
  json reports = json::array();
  for (int l = lo; l <= hi; ++l) {
    const MinimizerReport r = verify_powered_minimizer(dims, profile, l, grid);
    reports.push_back({{"lambda", r.lambda},
                       {"grid_points", r.grid_points},
                       {"minimizer", r.minimizer},
                       {"l1_min", r.l1_min},
                       {"minimizer_count", r.minimizer_count},
                       {"unique", r.unique},
                       {"at_truth_vertex", r.at_truth_vertex},
                       {"truth_mass", r.truth_mass},
                       {"l2_at_minimizer", r.l2_at_minimizer},
                       {"l2_min", r.l2_min},
                       {"l2_minimized_there", r.l2_minimized_there}});
    std::cout << "lambda " << l << ": " << r.minimizer_count << " minimizer(s), truth mass " << r.truth_mass
              << (r.at_truth_vertex ? " (truth vertex)" : "") << "\n";
  }
  const CorollaryReport cr = corollary_sweep(dims, profile, std::max(lo, 2), hi, grid);
  json pj = json::array();
  for (const auto& e : profile) pj.push_back({{"truth", e.truth}, {"distractors", e.distractors}});
  const fs::path out(c.out);
  write_json(out / "summary.json",
             {{"subcommand", "verify-theorem3"},
              {"dims", dims},
              {"profile", pj},
              {"grid_step", grid},
              {"reports", reports},
              {"corollary", {{"lambdas", cr.lambdas}, {"truth_mass", cr.truth_mass},
                             {"non_decreasing", cr.non_decreasing}}}});
  std::ofstream csv(out / "minimizer.csv", std::ios::binary | std::ios::trunc);
  csv.precision(17);
  csv << "lambda,minimizer_count,truth_mass,l1_min,l2_at_minimizer,l2_min\n";
  for (const auto& r : reports)
    csv << r["lambda"].get<int>() << ',' << r["minimizer_count"].get<std::size_t>() << ','
        << r["truth_mass"].get<double>() << ',' << r["l1_min"].get<double>() << ','
        << r["l2_at_minimizer"].get<double>() << ',' << r["l2_min"].get<double>() << '\n';
  timer.finish(out);
  return 0;
}

int cmd_oracle_prune(const Common& c, std::size_t seeds) {
  Timer timer("oracle-prune");
  const ExperimentConfig base = resolve_config(c);
  if (seeds < 1) fail(Errc::InvalidConfig, "--seeds must be >= 1");
  const fs::path out(c.out);
  RunSink sink(out);
  json runs = json::array();
  std::map<std::string, std::vector<double>> acc;
  for (std::size_t i = 0; i < seeds; ++i) {
    const ExperimentConfig cfg = with_seed(base, base.seed + i);
    const Splits s = make_splits(cfg.data, cfg.seed);
    const OraclePruneResult r = oracle_prune_experiment(s, dims_for(cfg, s), cfg.train);
    for (const RunResult* x : {&r.full_pll, &r.pruned_pll, &r.supervised}) {
      sink.add(*x, cfg.seed);
      runs.push_back(run_json(*x, cfg.seed));
      acc[x->method].push_back(x->test_acc);
      timer.lap(x->method + "/" + std::to_string(cfg.seed), x->wall_seconds);
    }
    std::cout << "seed " << cfg.seed << ": full_pll " << r.full_pll.test_acc << ", pruned_pll "
              << r.pruned_pll.test_acc << ", full_supervised " << r.supervised.test_acc << "\n";
  }
  json agg = json::object();
  for (const auto& [m, v] : acc) agg[m] = {{"mean_test_acc", mean(v)}, {"stderr_test_acc", std_error(v)}};
  const double a = mean(acc["full_pll"]), b = mean(acc["pruned_pll"]), sup = mean(acc["full_supervised"]);
  write_json(out / "summary.json", {{"subcommand", "oracle-prune"},
                                    {"config", to_json(base)},
                                    {"runs", runs},
                                    {"aggregate", agg},
                                    {"pruned_minus_full_pll", b - a},
                                    {"supervised_minus_pruned", sup - b}});
  timer.finish(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-label graph classification with cause discovery"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, ablate_c, base_c, grad_c, causes_c, thm_c, prune_c;
  auto* gen = app.add_subcommand("gen-data", "generate a planted dataset with candidate-label noise");
  add_common(gen, gen_c);

  std::string train_method = "gpcd", train_data;
  std::size_t train_seeds = 1;
  auto* train = app.add_subcommand("train", "train one method");
  add_common(train, train_c);
  train->add_option("--method", train_method, "gpcd | gpcd_wo_lambda | gpcd_wo_auxiliary | baseline_ce")
      ->capture_default_str();
  train->add_option("--data", train_data, "directory written by gen-data (default: generate from config)");
  train->add_option("--seeds", train_seeds, "number of consecutive seeds")->capture_default_str();

  std::string eval_model, eval_data;
  auto* eval = app.add_subcommand("eval", "evaluate a saved model");
  add_common(eval, eval_c);
  eval->add_option("--model", eval_model, "model.json written by train")->required();
  eval->add_option("--data", eval_data, "directory written by gen-data");

  std::string ablate_data;
  std::size_t ablate_seeds = 1;
  auto* ablate = app.add_subcommand("ablate", "GPCD against its w/o-lambda and w/o-auxiliary ablations");
  add_common(ablate, ablate_c);
  ablate->add_option("--data", ablate_data, "directory written by gen-data");
  ablate->add_option("--seeds", ablate_seeds, "number of consecutive seeds")->capture_default_str();

  std::string base_data;
  std::size_t base_seeds = 1;
  auto* baseline = app.add_subcommand("baseline", "candidate cross-entropy baseline");
  add_common(baseline, base_c);
  baseline->add_option("--data", base_data, "directory written by gen-data");
  baseline->add_option("--seeds", base_seeds, "number of consecutive seeds")->capture_default_str();

  std::size_t grad_probes = 200;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of both training objectives");
  add_common(grad, grad_c);
  grad->add_option("--probes", grad_probes, "entries probed per objective")->capture_default_str();

  std::string causes_model, causes_data;
  std::size_t causes_graphs = 50;
  auto* causes = app.add_subcommand("causes", "dump prototypes and per-node attributions");
  add_common(causes, causes_c);
  causes->add_option("--model", causes_model, "saved model (default: train GPCD first)");
  causes->add_option("--data", causes_data, "directory written by gen-data");
  causes->add_option("--graphs", causes_graphs, "test graphs to dump")->capture_default_str();

  int thm_dims = 3, thm_lo = 1, thm_hi = 7;
  std::string thm_profile = "0:1;0:2";
  double thm_grid = 0.01;
  auto* thm = app.add_subcommand("verify-theorem3", "grid search of the lambda-powered candidate objective");
  add_common(thm, thm_c);
  thm->add_option("--dims", thm_dims, "number of classes")->capture_default_str();
  thm->add_option("--profile", thm_profile, "truth:distractor,... entries separated by ';'")->capture_default_str();
  thm->add_option("--lambda-min", thm_lo)->capture_default_str();
  thm->add_option("--lambda-max", thm_hi)->capture_default_str();
  thm->add_option("--grid", thm_grid, "simplex grid step")->capture_default_str();

  std::size_t prune_seeds = 1;
  auto* prune = app.add_subcommand("oracle-prune", "full vs causal-pruned vs supervised training");
  add_common(prune, prune_c);
  prune->add_option("--seeds", prune_seeds, "number of consecutive seeds")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    auto prepare = [](const Common& c) { fs::create_directories(c.out); };
    if (gen->parsed()) return prepare(gen_c), cmd_gen_data(gen_c);
    if (train->parsed())
      return prepare(train_c), run_methods(train_c, "train", {parse_method(train_method)}, train_seeds, train_data, true);
    if (eval->parsed()) return prepare(eval_c), cmd_eval(eval_c, eval_model, eval_data);
    if (ablate->parsed())
      return prepare(ablate_c),
             run_methods(ablate_c, "ablate", {Method::Gpcd, Method::WoLambda, Method::WoAuxiliary}, ablate_seeds,
                         ablate_data, false);
    if (baseline->parsed())
      return prepare(base_c), run_methods(base_c, "baseline", {Method::BaselineCe}, base_seeds, base_data, true);
    if (grad->parsed()) return prepare(grad_c), cmd_gradcheck(grad_c, grad_probes);
    if (causes->parsed()) return prepare(causes_c), cmd_causes(causes_c, causes_model, causes_data, causes_graphs);
    if (thm->parsed()) return prepare(thm_c), cmd_theorem(thm_c, thm_dims, thm_profile, thm_lo, thm_hi, thm_grid);
    if (prune->parsed()) return prepare(prune_c), cmd_oracle_prune(prune_c, prune_seeds);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
