#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gpcd/autodiff.hpp"
#include "gpcd/rng.hpp"

namespace gpcd {

struct GradcheckOptions {
  std::size_t probe_count = 50;
  double step = 1e-5;
  std::uint64_t seed = 0;
  // A probe whose one-sided slopes disagree by more than this fraction straddles a kink.
  double kink_tolerance = 1e-3;
  std::size_t max_redraws = 1000;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t kinks_skipped = 0;
};

using LossFn = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central finite differences on randomly chosen
/// parameter entries. Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
inline GradcheckReport gradcheck(const LossFn& forward, std::span<Parameter* const> params,
                                 const GradcheckOptions& opt = {}) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(forward(tape));
  }
  auto eval = [&] {
    Tape tape(Tape::Mode::Inference);
    return forward(tape).scalar();
  };

  std::size_t total = 0;
  for (Parameter* p : params) total += p->value.size();
  GradcheckReport report;
  if (total == 0) return report;

  Rng rng = make_rng(opt.seed, 0x6772616463686bULL);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const double h = opt.step;
  std::size_t redraws = 0;
  while (report.probes < opt.probe_count) {
    std::size_t flat = pick(rng);
    Parameter* p = nullptr;
    for (Parameter* q : params) {
      if (flat < q->value.size()) {
        p = q;
        break;
      }
      flat -= q->value.size();
    }
    double& x = p->value[flat];
    const double x0 = x;
    const double f0 = eval();
    x = x0 + h;
    const double fp = eval();
    x = x0 - h;
    const double fm = eval();
    x = x0;

    const double right = (fp - f0) / h;
    const double left = (f0 - fm) / h;
    const double slope_scale = std::max({std::abs(left), std::abs(right), 1e-3});
    if (std::abs(left - right) > opt.kink_tolerance * slope_scale && redraws < opt.max_redraws) {
      ++report.kinks_skipped;
      ++redraws;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = p->grad[flat];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / denom);
    ++report.probes;
  }
  return report;
}

}  // namespace gpcd
