#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gpcd/gpcd.hpp"
#include "test_util.hpp"

using namespace gpcd;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(std::uint64_t seed) {
  ExperimentConfig c = config_from_json(nlohmann::json::object());
  c.seed = seed;
  c.train.seed = seed;
  c.data.n_train = 64;
  c.data.n_val = 20;
  c.data.n_test = 20;
  c.model.encoder_hidden = {16, 16};
  c.model.head_hidden = 8;
  c.model.classifier_hidden = 8;
  c.train.elbow_max_k = 21;
  return c;
}

void expect_same_params(const Model& a, const Model& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

void expect_same_losses(const RunResult& a, const RunResult& b) {
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_EQ(a.epochs[e].loss, b.epochs[e].loss) << "epoch " << e + 1;
    EXPECT_EQ(a.epochs[e].l_ce, b.epochs[e].l_ce);
    EXPECT_EQ(a.epochs[e].val_acc, b.epochs[e].val_acc);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gpcd_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GPCD_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Config

TEST(Config, DefaultsAndOverrides) {
  const ExperimentConfig d = config_from_json(nlohmann::json::object());
  EXPECT_EQ(d.train.pretrain_epochs, 5u);
  EXPECT_EQ(d.train.aux_epochs, 20u);
  EXPECT_EQ(d.train.lambda, 4);
  EXPECT_DOUBLE_EQ(d.train.delta0, 0.15);
  EXPECT_DOUBLE_EQ(d.train.beta, 0.7);
  EXPECT_DOUBLE_EQ(d.train.alpha, 0.28);
  EXPECT_EQ(d.train.period, 4u);
  EXPECT_DOUBLE_EQ(d.train.lr, 1e-4);
  EXPECT_EQ(d.train.batch_size, 32u);
  EXPECT_DOUBLE_EQ(d.train.w_g, 0.5);
  EXPECT_EQ(d.train.max_extraction_rounds, 5u);
  EXPECT_EQ(d.data.n_train, 500u);

  const auto j = nlohmann::json::parse(R"({"seed": 9, "data": {"num_classes": 4, "noise": {"kind": "competitive",
      "rho": 0.7}}, "train": {"lambda": 2, "beta": 0.5}})");
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.model.num_classes, 4);
  EXPECT_EQ(c.data.noise.kind, NoiseKind::Competitive);
  EXPECT_DOUBLE_EQ(c.data.noise.rho, 0.7);
  EXPECT_EQ(c.train.lambda, 2);
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, Errors) {
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"train": {"lamda": 2}})")), Errc::InvalidConfig);
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"extra": 1})")), Errc::InvalidConfig);
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"train": {"lambda": "four"}})")), Errc::InvalidConfig);
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"train": {"pretrain_epochs": 0}})")), Errc::InvalidConfig);
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"train": {"lambda": 8}})")), Errc::InvalidConfig);
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"train": {"beta": 1.0}})")), Errc::InvalidConfig);
  EXPECT_ERRC(config_from_json(nlohmann::json::parse(R"({"data": {"noise": {"kind": "other"}}})")),
              Errc::InvalidConfig);
  EXPECT_ERRC(load_config("/nonexistent/config.json"), Errc::IoError);
  const fs::path bad = scratch("badcfg") / "c.json";
  std::ofstream(bad) << "{ \"train\": ";
  EXPECT_ERRC(load_config(bad.string()), Errc::FormatError);
}

// ---------------------------------------------------------------------------------------------
// Evaluation

TEST(Evaluate, MatchesRecountOracle) {
  const ExperimentConfig c = small_config(1);
  const Splits s = make_splits(c.data, c.seed);
  ModelDims dims = c.model;
  const Model m = init_model(dims, 3);
  std::size_t correct = 0;
  for (const auto& smp : s.test.samples) {
    const auto p = graph_predict(smp.graph, m);
    std::size_t best = 0;
    for (std::size_t d = 1; d < p.size(); ++d)
      if (p[d] > p[best]) best = d;
    correct += static_cast<int>(best) == smp.ground_truth;
  }
  EXPECT_EQ(evaluate(s.test, m).accuracy, static_cast<double>(correct) / s.test.samples.size());
}

TEST(Evaluate, PerfectAndChancePredictors) {
  ExperimentConfig c = small_config(2);
  c.data.n_test = 600;
  const Splits s = make_splits(c.data, c.seed);
  Model m = init_model(c.model, 2);
  for (Parameter* p : {&m.classifier.w1, &m.classifier.b1, &m.classifier.w2, &m.classifier.b2}) p->value.fill(0.0);
  // uniform predictions: ties go to class 0, so accuracy is the class-0 share (about 1/3)
  EXPECT_NEAR(evaluate(s.test, m).accuracy, 1.0 / 3.0, 0.06);
  Dataset zeros = s.test;
  for (auto& smp : zeros.samples) smp.ground_truth = 0;
  EXPECT_EQ(evaluate(zeros, m).accuracy, 1.0);
  EXPECT_NEAR(evaluate(zeros, m).candidate_loss, std::log(3.0), 1e-12);
}

// ---------------------------------------------------------------------------------------------
// Training loop

TEST(Training, SingleBatchEpochMatchesHandStep) {
  ExperimentConfig c = small_config(3);
  c.train.pretrain_epochs = 1;
  c.train.aux_epochs = 0;
  c.train.batch_size = 1000;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult r = run_method(s, c.model, c.train, {Method::WoAuxiliary, false});

  Model hand = init_model(c.model, sub_seed(c.seed, 1));
  std::vector<std::size_t> order(s.train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(c.seed, 0x7368756666ULL);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<const PLLSample*> batch;
  for (std::size_t i : order) batch.push_back(&s.train.samples[i]);
  auto params = hand.parameters();
  zero_grads(params);
  Tape tape;
  Var loss = ops::add(loss_ce(tape, batch, hand), loss_o(tape, batch, hand.encoder, hand.head));
  tape.backward(loss);
  adam_step(params, AdamConfig{c.train.lr, c.train.adam_beta1, c.train.adam_beta2, c.train.adam_eps});

  EXPECT_NEAR(r.epochs[0].loss, loss.scalar(), 1e-12);
  const auto pr = r.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t k = 0; k < params[i]->value.size(); ++k)
      EXPECT_NEAR(pr[i]->value[k], params[i]->value[k], 1e-12);
}

TEST(Training, PretrainingReducesLoss) {
  std::vector<double> ratio;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExperimentConfig c = small_config(seed);
    c.data.n_train = 200;
    c.train.aux_epochs = 0;
    const Splits s = make_splits(c.data, c.seed);
    std::vector<const PLLSample*> all;
    for (const auto& smp : s.train.samples) all.push_back(&smp);
    auto objective = [&](const Model& m) {
      Tape t(Tape::Mode::Inference);
      return ops::add(loss_ce(t, all, m), loss_o(t, all, m.encoder, m.head)).scalar();
    };
    const double before = objective(init_model(c.model, sub_seed(seed, 1)));
    const RunResult r = run_gpcd(s, c.model, c.train);
    ratio.push_back(objective(r.model) / before);
  }
  std::sort(ratio.begin(), ratio.end());
  EXPECT_LE(ratio[2], 1.0);
}

TEST(Training, PhasesAndExtractionSchedule) {
  ExperimentConfig c = small_config(4);
  c.train.pretrain_epochs = 2;
  c.train.aux_epochs = 4;  // equals the period: one round
  const Splits s = make_splits(c.data, c.seed);
  const RunResult r = run_gpcd(s, c.model, c.train);
  ASSERT_EQ(r.epochs.size(), 6u);
  EXPECT_EQ(r.epochs[0].phase, "pretrain");
  EXPECT_EQ(r.epochs[1].phase, "pretrain");
  EXPECT_EQ(r.epochs[2].phase, "auxiliary");
  ASSERT_EQ(r.extractions.size(), 1u);
  EXPECT_EQ(r.extractions[0].epoch, 3u);
  EXPECT_DOUBLE_EQ(r.extractions[0].delta, 0.15);

  c.train.aux_epochs = 9;  // rounds at aux epochs 0, 4, 8
  const RunResult r3 = run_gpcd(s, c.model, c.train);
  ASSERT_EQ(r3.extractions.size(), 3u);
  EXPECT_DOUBLE_EQ(r3.extractions[1].delta, 0.20);
  EXPECT_EQ(r3.extractions[2].epoch, 11u);

  c.train.max_extraction_rounds = 1;
  EXPECT_EQ(run_gpcd(s, c.model, c.train).extractions.size(), 1u);
}

TEST(Training, BestValidationSelection) {
  ExperimentConfig c = small_config(5);
  c.train.aux_epochs = 3;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult r = run_gpcd(s, c.model, c.train);
  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& e : r.epochs)
    if (e.val_acc > best) {
      best = e.val_acc;
      best_epoch = e.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.test_acc, r.epochs[best_epoch - 1].test_acc);
  EXPECT_EQ(r.final_test_acc, r.epochs.back().test_acc);
}

TEST(Training, EmptyPrototypeSetDegeneratesToPretrainLosses) {
  ExperimentConfig c = small_config(6);
  c.train.pretrain_epochs = 1;
  c.train.aux_epochs = 4;
  c.train.period = 2;
  c.train.delta0 = 0.999;  // nothing clears this threshold
  c.train.delta_cap = 0.999;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult g = run_gpcd(s, c.model, c.train);
  for (const auto& e : g.extractions) EXPECT_EQ(e.selected, 0u);
  ASSERT_FALSE(g.extractions.empty());
  const RunResult w = run_ablation(s, c.model, c.train, Ablation::WoAuxiliary);
  expect_same_losses(g, w);
  expect_same_params(g.model, w.model);
}

TEST(Training, WithoutAuxiliaryIsExtendedPretraining) {
  ExperimentConfig c = small_config(7);
  c.train.pretrain_epochs = 2;
  c.train.aux_epochs = 3;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult w = run_ablation(s, c.model, c.train, Ablation::WoAuxiliary);
  EXPECT_TRUE(w.extractions.empty());
  for (const auto& e : w.epochs) EXPECT_EQ(e.l_v, 0.0);
  ExperimentConfig p = c;
  p.train.pretrain_epochs = 5;
  p.train.aux_epochs = 0;
  const RunResult pre = run_gpcd(s, p.model, p.train);
  expect_same_losses(w, pre);
  expect_same_params(w.model, pre.model);
}

TEST(Training, WithoutLambdaOnlyChangesTheExponent) {
  ExperimentConfig c = small_config(8);
  c.train.pretrain_epochs = 1;
  c.train.aux_epochs = 3;
  c.train.lambda = 1;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult a = run_gpcd(s, c.model, c.train);
  const RunResult b = run_ablation(s, c.model, c.train, Ablation::WoLambda);
  expect_same_losses(a, b);
  expect_same_params(a.model, b.model);
  EXPECT_EQ(b.method, "gpcd_wo_lambda");
}

TEST(Training, BaselineUsesCandidateCeOnly) {
  ExperimentConfig c = small_config(9);
  c.train.pretrain_epochs = 1;
  c.train.aux_epochs = 2;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult r = run_baseline_ce(s, c.model, c.train);
  ASSERT_EQ(r.epochs.size(), 3u);
  for (const auto& e : r.epochs) {
    EXPECT_EQ(e.loss, e.l_ce);
    EXPECT_EQ(e.phase, "train");
  }
  EXPECT_TRUE(r.recovery.has_value());
}

TEST(Training, Deterministic) {
  ExperimentConfig c = small_config(10);
  c.train.pretrain_epochs = 1;
  c.train.aux_epochs = 4;
  const Splits s = make_splits(c.data, c.seed);
  const RunResult a = run_gpcd(s, c.model, c.train), b = run_gpcd(s, c.model, c.train);
  expect_same_losses(a, b);
  expect_same_params(a.model, b.model);
}

// ---------------------------------------------------------------------------------------------
// Theorem verification

TEST(PoweredMinimizer, TwoSampleProfile) {
  const std::vector<ProfileEntry> profile{{0, {1}}, {0, {2}}};
  const MinimizerReport r = verify_powered_minimizer(3, profile, 2, 0.01);
  EXPECT_EQ(r.minimizer, (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_DOUBLE_EQ(r.l1_min, -2.0);
  EXPECT_TRUE(r.unique);
  EXPECT_TRUE(r.at_truth_vertex);
  EXPECT_TRUE(r.l2_minimized_there);
  EXPECT_EQ(r.grid_points, 5151u);
  EXPECT_DOUBLE_EQ(theorem_l1(profile, {0.5, 0.25, 0.25}, 2), -(0.25 + 0.0625 + 0.25 + 0.0625));
}

TEST(PoweredMinimizer, InvalidProfiles) {
  EXPECT_ERRC(verify_powered_minimizer(3, {{0, {1}}, {0, {1}}}, 2, 0.01), Errc::InvalidProfile);
  EXPECT_ERRC(verify_powered_minimizer(3, {{0, {1}}, {1, {2}}}, 2, 0.01), Errc::InvalidProfile);
  EXPECT_ERRC(verify_powered_minimizer(3, {{0, {3}}, {0, {1}}}, 2, 0.01), Errc::InvalidProfile);
}

TEST(PoweredMinimizer, CorollarySweepIsNonDecreasing) {
  const CorollaryReport c = corollary_sweep(4, {{0, {1, 2}}, {0, {1, 3}}, {0, {2, 3}}}, 2, 7, 0.02);
  EXPECT_EQ(c.lambdas.size(), 6u);
  EXPECT_TRUE(c.non_decreasing);
}

// ---------------------------------------------------------------------------------------------
// Oracle pruning

TEST(OraclePrune, AllTrueMaskIsIdentity) {
  ExperimentConfig c = small_config(11);
  c.train.pretrain_epochs = 1;
  c.train.aux_epochs = 2;
  Splits s = make_splits(c.data, c.seed);
  for (Dataset* ds : {&s.train, &s.validation, &s.test})
    for (auto& smp : ds->samples) smp.causal_mask = std::vector<bool>(smp.graph.node_count(), true);
  EXPECT_EQ(prune_to_causal(s.train), s.train);
  const OraclePruneResult r = oracle_prune_experiment(s, c.model, c.train);
  expect_same_losses(r.full_pll, r.pruned_pll);
  EXPECT_EQ(r.full_pll.test_acc, r.pruned_pll.test_acc);
}

TEST(OraclePrune, PrunesToCausalNodes) {
  const ExperimentConfig c = small_config(12);
  const Splits s = make_splits(c.data, c.seed);
  const Dataset p = prune_to_causal(s.train);
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    EXPECT_EQ(p.samples[i].graph.node_count(), c.data.causal_nodes);
    EXPECT_EQ(p.samples[i].candidates, s.train.samples[i].candidates);
  }
  const Dataset t = with_true_labels(s.train);
  for (const auto& smp : t.samples) EXPECT_EQ(smp.candidates.labels, std::vector<int>{smp.ground_truth});
}

TEST(OraclePrune, MissingCausalMask) {
  ExperimentConfig c = small_config(13);
  Splits s = make_splits(c.data, c.seed);
  s.test.samples[3].causal_mask.reset();
  EXPECT_ERRC(oracle_prune_experiment(s, c.model, c.train), Errc::MissingCausalMask);
  EXPECT_ERRC(prune_to_causal(s.test), Errc::MissingCausalMask);
}

// ---------------------------------------------------------------------------------------------
// Command line

TEST(Cli, TrainSummariesAreByteIdentical) {
  const fs::path dir = scratch("det");
  std::ofstream(dir / "cfg.json") << R"({"data": {"n_train": 48, "n_val": 16, "n_test": 16},
    "train": {"pretrain_epochs": 1, "aux_epochs": 4, "period": 2, "elbow_max_k": 21}})";
  const std::string cfg = "--config \"" + (dir / "cfg.json").string() + "\" --seed 21 ";
  ASSERT_EQ(run_cli("train " + cfg + "--out \"" + (dir / "a").string() + "\""), 0);
  ASSERT_EQ(run_cli("train " + cfg + "--out \"" + (dir / "b").string() + "\""), 0);
  const std::string a = slurp(dir / "a" / "summary.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "summary.json"));
  EXPECT_EQ(slurp(dir / "a" / "metrics.jsonl"), slurp(dir / "b" / "metrics.jsonl"));

  // metrics parse back: one record per epoch, epochs increasing
  std::ifstream in(dir / "a" / "metrics.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), ++n);
  }
  EXPECT_EQ(n, 5u);
  EXPECT_TRUE(fs::exists(dir / "a" / "curves.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "timing.json"));
  EXPECT_TRUE(fs::exists(dir / "a" / "model.json"));
}

TEST(Cli, GenDataThenEval) {
  const fs::path dir = scratch("gen");
  std::ofstream(dir / "cfg.json") << R"({"data": {"n_train": 30, "n_val": 10, "n_test": 10},
    "train": {"pretrain_epochs": 1, "aux_epochs": 0}})";
  const std::string cfg = "--config \"" + (dir / "cfg.json").string() + "\" --seed 4 ";
  ASSERT_EQ(run_cli("gen-data " + cfg + "--out \"" + (dir / "data").string() + "\""), 0);
  const Dataset train = load_dataset((dir / "data" / "train.jsonl").string());
  EXPECT_EQ(train.samples.size(), 30u);
  ASSERT_EQ(run_cli("train " + cfg + "--data \"" + (dir / "data").string() + "\" --out \"" + (dir / "t").string() +
                    "\""),
            0);
  ASSERT_EQ(run_cli("eval " + cfg + "--data \"" + (dir / "data").string() + "\" --model \"" +
                    (dir / "t" / "model.json").string() + "\" --out \"" + (dir / "e").string() + "\""),
            0);
  const auto e = nlohmann::json::parse(slurp(dir / "e" / "summary.json"));
  const auto t = nlohmann::json::parse(slurp(dir / "t" / "summary.json"));
  EXPECT_EQ(e["test"]["accuracy"].get<double>(), t["runs"][0]["final_test_acc"].get<double>());
}

TEST(Cli, OtherSubcommands) {
  const fs::path dir = scratch("misc");
  ASSERT_EQ(run_cli("gradcheck --seed 2 --out \"" + (dir / "g").string() + "\""), 0);
  const auto g = nlohmann::json::parse(slurp(dir / "g" / "summary.json"));
  EXPECT_TRUE(g["pretrain"]["pass"].get<bool>());
  EXPECT_TRUE(g["auxiliary"]["pass"].get<bool>());
  ASSERT_EQ(run_cli("verify-theorem3 --seed 1 --lambda-min 2 --out \"" + (dir / "t").string() + "\""), 0);
  const auto t = nlohmann::json::parse(slurp(dir / "t" / "summary.json"));
  EXPECT_TRUE(t["reports"][0]["at_truth_vertex"].get<bool>());
  EXPECT_NE(run_cli("verify-theorem3 --profile \"0:1;0:1\" --out \"" + (dir / "x").string() + "\""), 0);
  std::ofstream(dir / "bad.json") << R"({"train": {"unknown_knob": 1}})";
  EXPECT_NE(run_cli("train --config \"" + (dir / "bad.json").string() + "\" --out \"" + (dir / "y").string() + "\""),
            0);
  EXPECT_NE(run_cli("bogus-subcommand"), 0);
}
