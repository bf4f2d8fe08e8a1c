#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "gpcd/error.hpp"
#include "gpcd/tensor.hpp"

namespace gpcd {

/// Trainable tensor with its gradient and Adam moment accumulators, all of the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;
  Tensor second_moment;
  std::size_t steps = 0;
  bool grad_ready = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.rows(), value.cols()),
        first_moment(value.rows(), value.cols()),
        second_moment(value.rows(), value.cols()) {}

  void zero_grad() {
    grad.fill(0.0);
    grad_ready = true;
  }

  void reset_optimizer_state() {
    first_moment.fill(0.0);
    second_moment.fill(0.0);
    steps = 0;
  }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()[0]; }
};

/// Records operations for reverse-mode differentiation. Single-threaded; nodes are
/// replayed in exact reverse order of recording and gradients accumulate additively.
class Tape {
 public:
  enum class Mode { Train, Inference };
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(Mode mode = Mode::Train) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const noexcept { return mode_; }
  bool training() const noexcept { return mode_ == Mode::Train; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value) {
    require_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return {this, nodes_.size() - 1};
  }

  Var param(Parameter& p) {
    require_finite(p.value, p.name.c_str());
    nodes_.push_back(Node{p.value, {}, {}, training() ? &p : nullptr, training()});
    return {this, nodes_.size() - 1};
  }

  /// A read-only parameter enters the tape as a constant.
  Var param(const Parameter& p) { return constant(p.value); }

  /// Records an operation node. `backward` receives the tape and this node's id and must
  /// push contributions into its inputs through `accumulate`.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward, const char* op) {
    require_finite(value, op);
    bool needs = false;
    if (training())
      for (const Var& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
    return {this, nodes_.size() - 1};
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient of the loss with respect to node `id` (zero tensor if nothing flowed there).
  const Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Tensor& grad_buffer(std::size_t id) {
    grad(id);
    return nodes_[id].grad;
  }

  void accumulate(std::size_t id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    Tensor& buf = grad_buffer(id);
    require_same_shape(buf, g, "accumulate");
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
  }

  /// Populates Parameter::grad of every parameter reachable from `loss` (accumulating).
  void backward(Var loss) {
    if (loss.tape != this) fail(Errc::ShapeMismatch, "loss recorded on another tape");
    const Tensor& lv = nodes_[loss.id].value;
    if (lv.rows() != 1 || lv.cols() != 1) fail(Errc::NotScalar, "backward on " + lv.shape_str());
    for (Node& n : nodes_) n.grad = Tensor();
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        Parameter& p = *n.param;
        if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
        for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad[k] += n.grad[k];
        p.grad_ready = true;
      }
    }
  }

  /// Number of log() inputs clamped to the probability floor.
  std::size_t clamp_events() const noexcept { return clamp_events_; }
  void note_clamp(std::size_t n) noexcept { clamp_events_ += n; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param;
    bool requires_grad;
  };

  Mode mode_;
  std::vector<Node> nodes_;
  std::size_t clamp_events_ = 0;
};

inline const Tensor& Var::value() const { return tape->value(id); }

namespace ops {

inline constexpr double kLogFloor = 1e-30;

inline void same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) fail(Errc::ShapeMismatch, std::string(op) + ": operands on different tapes");
}

inline Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  Tensor y = kernels::matmul(a.value(), b.value());
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a.id)) t.accumulate(a.id, kernels::matmul_nt(g, t.value(b.id)));
    if (t.requires_grad(b.id)) t.accumulate(b.id, kernels::matmul_tn(t.value(a.id), g));
  }, "matmul");
}

inline Var add(Var a, Var b) {
  same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor g = t.grad(self);
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  }, "add");
}

/// x (R x C) plus the row vector b (1 x C) added to every row.
inline Var add_row(Var x, Var b) {
  same_tape(x, b, "add_row");
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    fail(Errc::ShapeMismatch, "add_row: " + xv.shape_str() + " + " + bv.shape_str());
  Tensor y = xv;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += bv[c];
  return x.tape->record(std::move(y), {x, b}, [x, b](Tape& t, std::size_t self) {
    const Tensor g = t.grad(self);
    t.accumulate(x.id, g);
    if (t.requires_grad(b.id)) {
      Tensor gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
      t.accumulate(b.id, gb);
    }
  }, "add_row");
}

inline Var elementwise_mul(Var a, Var b) {
  same_tape(a, b, "elementwise_mul");
  require_same_shape(a.value(), b.value(), "elementwise_mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a.id)) {
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= t.value(b.id)[i];
      t.accumulate(a.id, ga);
    }
    if (t.requires_grad(b.id)) {
      Tensor gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= t.value(a.id)[i];
      t.accumulate(b.id, gb);
    }
  }, "elementwise_mul");
}

inline Var scale(Var x, double s) {
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
  return x.tape->record(std::move(y), {x}, [x, s](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
    t.accumulate(x.id, g);
  }, "scale");
}

/// Subgradient at 0 is 0.
inline Var relu(Var x) {
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    const Tensor& xv = t.value(x.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(xv[i] > 0.0)) g[i] = 0.0;
    t.accumulate(x.id, g);
  }, "relu");
}

inline Var tanh(Var x) {
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    const Tensor& yv = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - yv[i] * yv[i];
    t.accumulate(x.id, g);
  }, "tanh");
}

inline Var softmax_rows(Var x) {
  return x.tape->record(kernels::softmax_rows(x.value()), {x}, [x](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor gx(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) = y(r, c) * (g(r, c) - dot);
    }
    t.accumulate(x.id, gx);
  }, "softmax_rows");
}

/// Natural log; inputs below 1e-30 are clamped to it (and counted on the tape) with zero gradient.
inline Var log(Var x) {
  Tensor y = x.value();
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= kLogFloor)) {
      y[i] = kLogFloor;
      ++clamped;
    }
    y[i] = std::log(y[i]);
  }
  x.tape->note_clamp(clamped);
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    const Tensor& xv = t.value(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = xv[i] >= kLogFloor ? g[i] / xv[i] : 0.0;
    t.accumulate(x.id, g);
  }, "log");
}

/// Column-wise mean over rows: R x C -> 1 x C.
inline Var mean_rows(Var x) {
  return x.tape->record(kernels::mean_rows(x.value()), {x}, [x](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(x.id);
    Tensor gx(xv.rows(), xv.cols());
    const double inv = 1.0 / static_cast<double>(xv.rows());
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t c = 0; c < xv.cols(); ++c) gx(r, c) = g[c] * inv;
    t.accumulate(x.id, gx);
  }, "mean_rows");
}

/// Column-wise sum over rows: R x C -> 1 x C.
inline Var sum_rows(Var x) {
  const Tensor& xv = x.value();
  Tensor y(1, xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) y[c] += xv(r, c);
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(x.id);
    Tensor gx(xv.rows(), xv.cols());
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t c = 0; c < xv.cols(); ++c) gx(r, c) = g[c];
    t.accumulate(x.id, gx);
  }, "sum_rows");
}

/// Sum of every entry, -> 1 x 1.
inline Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Tensor(1, 1, s), {x}, [x](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& xv = t.value(x.id);
    t.accumulate(x.id, Tensor(xv.rows(), xv.cols(), g));
  }, "sum_all");
}

inline double ipow(double base, int exponent) {
  double r = 1.0;
  for (int i = 0; i < exponent; ++i) r *= base;
  return r;
}

/// Elementwise x^lambda for a positive integer lambda (total on negative bases).
inline Var scalar_pow(Var x, int lambda) {
  if (lambda < 1) fail(Errc::InvalidConfig, "scalar_pow exponent must be a positive integer");
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ipow(y[i], lambda);
  return x.tape->record(std::move(y), {x}, [x, lambda](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    const Tensor& xv = t.value(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= lambda * ipow(xv[i], lambda - 1);
    t.accumulate(x.id, g);
  }, "scalar_pow");
}

}  // namespace ops
}  // namespace gpcd
