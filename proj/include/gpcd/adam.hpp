#pragma once

#include <cmath>
#include <span>

#include "gpcd/autodiff.hpp"
#include "gpcd/error.hpp"

namespace gpcd {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every parameter. Gradients are left untouched.
inline void adam_step(std::span<Parameter* const> params, const AdamConfig& cfg = {}) {
  for (const Parameter* p : params)
    if (!p->grad_ready || !p->grad.same_shape(p->value))
      fail(Errc::UninitializedGradient, "parameter '" + p->name + "' has no gradient");

  for (Parameter* p : params) {
    ++p->steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->steps));
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      double& m = p->first_moment[i];
      double& v = p->second_moment[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      p->value[i] -= cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
    }
  }
}

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace gpcd
