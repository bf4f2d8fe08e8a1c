#include <cmath>
#include <random>
#include <vector>

#include "gpcd/adam.hpp"
#include "gpcd/autodiff.hpp"
#include "gpcd/gradcheck.hpp"
#include "test_util.hpp"

using namespace gpcd;

namespace {

Var scalar_of(Tape& t, double v) { return t.constant(Tensor(1, 1, v)); }

// Finite-difference check of a single-input op wrapped into a scalar via a fixed random weighting.
double op_check(const std::function<Var(Var)>& op, Tensor x0, std::uint64_t seed, std::size_t probes = 30) {
  std::mt19937_64 rng(seed);
  Parameter x("x", std::move(x0));
  Tape probe(Tape::Mode::Inference);
  const Tensor shape = op(probe.constant(x.value)).value();
  const Tensor weights = testutil::random_tensor(shape.rows(), shape.cols(), rng);
  std::vector<Parameter*> ps{&x};
  GradcheckOptions opt;
  opt.probe_count = probes;
  opt.seed = seed;
  return gradcheck(
             [&](Tape& t) { return ops::sum_all(ops::elementwise_mul(op(t.param(x)), t.constant(weights))); }, ps,
             opt)
      .max_rel_error;
}

}  // namespace

TEST(Ops, TanhAtZeroAndRange) {
  Tape t;
  Var y = ops::tanh(t.constant(Tensor::from_rows({{0.0, 50.0, -50.0, 3.0}})));
  EXPECT_EQ(y.value()[0], 0.0);
  for (double v : y.value().data()) EXPECT_LE(std::abs(v), 1.0);
  EXPECT_LT(std::abs(y.value()[3]), 1.0);
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Tape t;
  Var y = ops::softmax_rows(t.constant(Tensor::from_rows({{0.0, 0.0}})));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.5);
}

TEST(Ops, SoftmaxRowsSumToOneForLargeInputs) {
  Tape t;
  Var y = ops::softmax_rows(t.constant(Tensor::from_rows({{1000.0, 0.0, -1000.0}, {3.0, 3.0, 3.0}})));
  for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(y.value()(r, 0) + y.value()(r, 1) + y.value()(r, 2), 1.0, 1e-12);
}

TEST(Ops, ScalarPowIntegerOnNegativeBase) {
  Tape t;
  EXPECT_DOUBLE_EQ(ops::scalar_pow(scalar_of(t, -0.5), 3).scalar(), -0.125);
  EXPECT_DOUBLE_EQ(ops::scalar_pow(scalar_of(t, -0.5), 2).scalar(), 0.25);
  EXPECT_ERRC(ops::scalar_pow(scalar_of(t, 2.0), 0), Errc::InvalidConfig);
}

TEST(Ops, ShapeMismatchIsReported) {
  Tape t;
  EXPECT_ERRC(ops::add(t.constant(Tensor(2, 2)), t.constant(Tensor(2, 3))), Errc::ShapeMismatch);
  EXPECT_ERRC(ops::matmul(t.constant(Tensor(2, 2)), t.constant(Tensor(3, 2))), Errc::ShapeMismatch);
  EXPECT_ERRC(Tensor(2, 2, std::vector<double>{1, 2, 3}), Errc::ShapeMismatch);
}

TEST(Ops, NonFiniteInputIsRejected) {
  Tape t;
  EXPECT_ERRC(t.constant(Tensor::from_rows({{1.0, std::nan("")}})), Errc::NonFiniteInput);
  Var big = t.constant(Tensor::from_rows({{1e300}}));
  EXPECT_ERRC(ops::elementwise_mul(big, big), Errc::NonFiniteInput);
}

TEST(Ops, LogClampsTinyInputsAndCounts) {
  Tape t;
  Var y = ops::log(t.constant(Tensor::from_rows({{0.0, 1.0}})));
  EXPECT_DOUBLE_EQ(y.value()[0], std::log(1e-30));
  EXPECT_DOUBLE_EQ(y.value()[1], 0.0);
  EXPECT_EQ(t.clamp_events(), 1u);
}

TEST(Ops, MeanAndSumRows) {
  Tape t;
  Var x = t.constant(Tensor::from_rows({{1.0, 3.0}, {3.0, 5.0}}));
  EXPECT_EQ(ops::mean_rows(x).value(), Tensor::from_rows({{2.0, 4.0}}));
  EXPECT_EQ(ops::sum_rows(x).value(), Tensor::from_rows({{4.0, 8.0}}));
  EXPECT_ERRC(ops::mean_rows(t.constant(Tensor(0, 2))), Errc::EmptyGraph);
}

TEST(Backward, LinearGradientEqualsInput) {
  Parameter w("w", Tensor::from_rows({{0.3, -0.2, 0.9}}));
  const Tensor x = Tensor::from_rows({{1.5, -2.0, 0.25}});
  w.zero_grad();
  Tape t;
  t.backward(ops::sum_all(ops::elementwise_mul(t.param(w), t.constant(x))));
  EXPECT_EQ(w.grad, x);
}

TEST(Backward, TanhDerivativeAtZero) {
  Parameter w("w", Tensor(1, 1, 0.0));
  w.zero_grad();
  Tape t;
  t.backward(ops::tanh(t.param(w)));
  EXPECT_DOUBLE_EQ(w.grad[0], 1.0);
}

TEST(Backward, ReluSubgradientAtZeroIsZero) {
  Parameter w("w", Tensor::from_rows({{0.0, 2.0, -1.0}}));
  w.zero_grad();
  Tape t;
  t.backward(ops::sum_all(ops::relu(t.param(w))));
  EXPECT_EQ(w.grad, Tensor::from_rows({{0.0, 1.0, 0.0}}));
}

TEST(Backward, NotScalarLoss) {
  Parameter w("w", Tensor(2, 2, 1.0));
  Tape t;
  EXPECT_ERRC(t.backward(t.param(w)), Errc::NotScalar);
}

TEST(Backward, RepeatedCallsAccumulate) {
  Parameter w("w", Tensor::from_rows({{2.0}}));
  w.zero_grad();
  for (int i = 0; i < 3; ++i) {
    Tape t;
    Var p = t.param(w);
    t.backward(ops::elementwise_mul(p, p));  // d/dw w^2 = 4
  }
  EXPECT_DOUBLE_EQ(w.grad[0], 12.0);
}

TEST(Backward, SharedInputAccumulatesAdditively) {
  Parameter w("w", Tensor::from_rows({{1.5, -0.5}}));
  w.zero_grad();
  Tape t;
  Var p = t.param(w);
  t.backward(ops::sum_all(ops::add(ops::scale(p, 2.0), ops::elementwise_mul(p, p))));
  EXPECT_DOUBLE_EQ(w.grad[0], 2.0 + 3.0);
  EXPECT_DOUBLE_EQ(w.grad[1], 2.0 - 1.0);
}

TEST(Backward, SumOfLossesEqualsSumOfBackwards) {
  std::mt19937_64 rng(11);
  Parameter a("a", testutil::random_tensor(3, 4, rng));
  Parameter b("b", testutil::random_tensor(4, 2, rng));
  std::vector<Parameter*> ps{&a, &b};
  auto l1 = [&](Tape& t) { return ops::sum_all(ops::tanh(ops::matmul(t.param(a), t.param(b)))); };
  auto l2 = [&](Tape& t) { return ops::sum_all(ops::softmax_rows(ops::matmul(t.param(a), t.param(b)))); };

  zero_grads(ps);
  {
    Tape t;
    t.backward(ops::add(l1(t), l2(t)));
  }
  const Tensor ga = a.grad, gb = b.grad;
  zero_grads(ps);
  {
    Tape t;
    t.backward(l1(t));
  }
  {
    Tape t;
    t.backward(l2(t));
  }
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(ga[i], a.grad[i], 1e-14);
  for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_NEAR(gb[i], b.grad[i], 1e-14);
}

TEST(Backward, ReplaysInExactReverseOrder) {
  Parameter w("w", Tensor(1, 1, 1.0));
  w.zero_grad();
  std::vector<int> order;
  Tape t;
  Var x = t.param(w);
  auto tag = [&](Var in, int id) {
    return t.record(in.value(), {in}, [in, id, &order](Tape& tp, std::size_t self) {
      order.push_back(id);
      tp.accumulate(in.id, tp.grad(self));
    }, "tag");
  };
  Var a = tag(x, 1);
  Var b = tag(a, 2);
  Var c = tag(b, 3);
  t.backward(c);
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1}));
}

TEST(Backward, InferenceTapeRecordsNoGradient) {
  Parameter w("w", Tensor(1, 1, 3.0));
  w.zero_grad();
  Tape t(Tape::Mode::Inference);
  Var y = ops::elementwise_mul(t.param(w), t.param(w));
  EXPECT_DOUBLE_EQ(y.scalar(), 9.0);
  EXPECT_FALSE(t.requires_grad(y.id));
  t.backward(y);
  EXPECT_DOUBLE_EQ(w.grad[0], 0.0);
}

TEST(OpGradients, EachOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const Tensor x = testutil::random_tensor(3, 4, rng, -0.9, 0.9);
  const Tensor m = testutil::random_tensor(4, 2, rng);
  const Tensor row = testutil::random_tensor(1, 4, rng);
  const Tensor positive = testutil::random_tensor(3, 4, rng, 0.2, 2.0);
  Tape consts(Tape::Mode::Inference);
  EXPECT_LT(op_check([&](Var v) { return ops::matmul(v, v.tape->constant(m)); }, x, 1), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::matmul(v.tape->constant(Tensor(m.cols(), m.rows(), 0.5)), v); }, m, 2),
            1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::add(v, ops::elementwise_mul(v, v)); }, x, 3), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::add_row(v.tape->constant(x), v); }, row, 4), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::add_row(v, v.tape->constant(row)); }, x, 5), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::tanh(v); }, x, 6), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::softmax_rows(v); }, x, 7), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::log(v); }, positive, 8), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::mean_rows(v); }, x, 9), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::sum_rows(v); }, x, 10), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::scalar_pow(v, 3); }, x, 11), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::scalar_pow(v, 4); }, x, 12), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::scale(v, -2.5); }, x, 13), 1e-6);
  EXPECT_LT(op_check([&](Var v) { return ops::relu(v); }, x, 14), 1e-6);
}

TEST(Gradcheck, QuadraticLoss) {
  std::mt19937_64 rng(5);
  Parameter w("w", testutil::random_tensor(4, 3, rng));
  const Tensor target = testutil::random_tensor(4, 3, rng);
  std::vector<Parameter*> ps{&w};
  const auto rep = gradcheck(
      [&](Tape& t) {
        Var d = ops::add(t.param(w), t.constant(target));
        return ops::sum_all(ops::elementwise_mul(d, d));
      },
      ps);
  EXPECT_LT(rep.max_rel_error, 1e-7);
  EXPECT_EQ(rep.probes, 50u);
}

TEST(Gradcheck, RandomThreeLayerComposition) {
  std::mt19937_64 rng(9);
  Parameter w1("w1", testutil::random_tensor(5, 6, rng)), w2("w2", testutil::random_tensor(6, 4, rng)),
      w3("w3", testutil::random_tensor(4, 3, rng)), b("b", testutil::random_tensor(1, 6, rng));
  const Tensor x = testutil::random_tensor(7, 5, rng);
  std::vector<Parameter*> ps{&w1, &w2, &w3, &b};
  const auto rep = gradcheck(
      [&](Tape& t) {
        Var h = ops::relu(ops::add_row(ops::matmul(t.constant(x), t.param(w1)), t.param(b)));
        Var g = ops::tanh(ops::matmul(h, t.param(w2)));
        Var p = ops::softmax_rows(ops::matmul(g, t.param(w3)));
        return ops::scale(ops::sum_all(ops::log(ops::mean_rows(p))), -1.0);
      },
      ps, {.probe_count = 80, .seed = 4});
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Gradcheck, ReluKinkProbesAreRedrawn) {
  // Half of the entries sit exactly on the relu kink; those probes are skipped and redrawn.
  Parameter w("w", Tensor::from_rows({{0.0, 0.0, 0.7, -0.4}}));
  std::vector<Parameter*> ps{&w};
  const auto rep = gradcheck([&](Tape& t) { return ops::sum_all(ops::relu(t.param(w))); }, ps, {.probe_count = 20});
  EXPECT_LT(rep.max_rel_error, 1e-7);
  EXPECT_GT(rep.kinks_skipped, 0u);
}

TEST(Adam, ZeroGradientLeavesValueUnchanged) {
  Parameter w("w", Tensor::from_rows({{1.0, -2.0}}));
  std::vector<Parameter*> ps{&w};
  zero_grads(ps);
  for (int i = 0; i < 5; ++i) adam_step(ps);
  EXPECT_EQ(w.value, Tensor::from_rows({{1.0, -2.0}}));
}

TEST(Adam, ConstantGradientStepApproachesLr) {
  Parameter w("w", Tensor(1, 1, 0.0));
  std::vector<Parameter*> ps{&w};
  AdamConfig cfg;
  double prev = 0.0, last_step = 0.0;
  for (int i = 0; i < 2000; ++i) {
    w.grad[0] = 0.3;
    w.grad_ready = true;
    adam_step(ps, cfg);
    last_step = prev - w.value[0];
    prev = w.value[0];
  }
  EXPECT_NEAR(last_step, cfg.lr, 1e-3 * cfg.lr);
}

TEST(Adam, SingleStepMovesAgainstGradient) {
  Parameter w("w", Tensor(1, 1, 1.0));
  std::vector<Parameter*> ps{&w};
  w.zero_grad();
  w.grad[0] = 1.0;
  adam_step(ps);
  EXPECT_LT(w.value[0], 1.0);
  EXPECT_NEAR(w.value[0], 1.0 - 1e-4, 1e-10);  // first bias-corrected step is lr * sign(g)
}

TEST(Adam, RequiresPopulatedGradient) {
  Parameter w("w", Tensor(1, 1, 1.0));
  std::vector<Parameter*> ps{&w};
  EXPECT_ERRC(adam_step(ps), Errc::UninitializedGradient);
}

TEST(Adam, ShapesOfStateStayEqual) {
  Parameter w("w", Tensor(3, 2, 0.5));
  EXPECT_TRUE(w.grad.same_shape(w.value));
  EXPECT_TRUE(w.first_moment.same_shape(w.value));
  EXPECT_TRUE(w.second_moment.same_shape(w.value));
}
