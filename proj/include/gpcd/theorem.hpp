#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "gpcd/autodiff.hpp"
#include "gpcd/error.hpp"

namespace gpcd {

/// One sample of a profile sharing a single causal subgraph: its ground-truth class and the
/// distractor classes that complete its candidate set.
struct ProfileEntry {
  int truth = 0;
  std::vector<int> distractors;
};

struct SimplexPoint {
  std::vector<double> psi;
  double value = 0.0;
};

struct MinimizerReport {
  int lambda = 0;
  std::size_t grid_points = 0;
  std::vector<double> minimizer;        // first minimizer in enumeration order
  double l1_min = 0.0;
  std::size_t minimizer_count = 0;      // grid points within tolerance of l1_min
  bool unique = false;
  bool at_truth_vertex = false;         // unique minimizer with all mass on the truth class
  double truth_mass = 0.0;              // smallest truth-class mass among tied minimizers
  double l2_at_minimizer = 0.0;
  double l2_min = 0.0;
  bool l2_minimized_there = false;
};

namespace detail {

/// Calls visit(psi) for every point of the simplex grid {n_d / N : sum n_d = N}.
inline void for_each_simplex_point(int dims, int steps, const std::function<void(const std::vector<double>&)>& visit) {
  std::vector<int> n(static_cast<std::size_t>(dims), 0);
  std::vector<double> psi(static_cast<std::size_t>(dims), 0.0);
  const double inv = 1.0 / static_cast<double>(steps);
  std::function<void(int, int)> rec = [&](int d, int left) {
    if (d == dims - 1) {
      n[static_cast<std::size_t>(d)] = left;
      for (int i = 0; i < dims; ++i) psi[static_cast<std::size_t>(i)] = n[static_cast<std::size_t>(i)] * inv;
      visit(psi);
      return;
    }
    for (int v = left; v >= 0; --v) {
      n[static_cast<std::size_t>(d)] = v;
      rec(d + 1, left - v);
    }
  };
  rec(0, steps);
}

inline bool close(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

}  // namespace detail

/// L_1(psi) = -sum_i sum_k psi[class(Y_i^k)]^lambda over the profile's candidate sets.
inline double theorem_l1(const std::vector<ProfileEntry>& profile, const std::vector<double>& psi, int lambda) {
  double total = 0.0;
  for (const auto& e : profile) {
    total -= ops::ipow(psi[static_cast<std::size_t>(e.truth)], lambda);
    for (int c : e.distractors) total -= ops::ipow(psi[static_cast<std::size_t>(c)], lambda);
  }
  return total;
}

/// L_2(psi) = -sum_i log psi[truth_i], the cross-entropy that sees only the ground truth.
inline double theorem_l2(const std::vector<ProfileEntry>& profile, const std::vector<double>& psi) {
  double total = 0.0;
  for (const auto& e : profile) {
    const double p = psi[static_cast<std::size_t>(e.truth)];
    total -= p > 0.0 ? std::log(p) : std::log(ops::kLogFloor);
  }
  return total;
}

inline void validate_profile(int dims, const std::vector<ProfileEntry>& profile) {
  if (dims < 2) fail(Errc::InvalidProfile, "need at least two classes");
  if (profile.empty()) fail(Errc::InvalidProfile, "empty profile");
  const int truth = profile.front().truth;
  std::set<std::vector<int>> distinct;
  for (const auto& e : profile) {
    if (e.truth != truth) fail(Errc::InvalidProfile, "profile entries must share the ground truth");
    if (e.distractors.empty()) fail(Errc::InvalidProfile, "entry without distractors");
    std::set<int> seen{e.truth};
    for (int c : e.distractors) {
      if (c < 0 || c >= dims) fail(Errc::InvalidProfile, "class out of range");
      if (!seen.insert(c).second) fail(Errc::InvalidProfile, "repeated class in a candidate set");
    }
    std::vector<int> sorted = e.distractors;
    std::sort(sorted.begin(), sorted.end());
    distinct.insert(sorted);
  }
  if (truth < 0 || truth >= dims) fail(Errc::InvalidProfile, "ground truth out of range");
  if (distinct.size() < 2) fail(Errc::InvalidProfile, "distractors are constant given the causal subgraph");
}

/// Brute-force search of the grid over the D-simplex for the minimizer of L_1, and a check
/// that L_2 is minimized at the same point.
inline MinimizerReport verify_powered_minimizer(int dims, const std::vector<ProfileEntry>& profile, int lambda,
                                      double grid_step) {
  validate_profile(dims, profile);
  if (lambda < 1) fail(Errc::InvalidConfig, "lambda must be >= 1");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) fail(Errc::InvalidConfig, "grid_step must be in (0,1]");
  const int steps = static_cast<int>(std::lround(1.0 / grid_step));
  const int truth = profile.front().truth;

  MinimizerReport r;
  r.lambda = lambda;
  r.l1_min = std::numeric_limits<double>::infinity();
  r.l2_min = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> ties;
  detail::for_each_simplex_point(dims, steps, [&](const std::vector<double>& psi) {
    ++r.grid_points;
    const double v = theorem_l1(profile, psi, lambda);
    r.l2_min = std::min(r.l2_min, theorem_l2(profile, psi));
    if (detail::close(v, r.l1_min)) {
      ties.push_back(psi);
    } else if (v < r.l1_min) {
      r.l1_min = v;
      ties.assign(1, psi);
    }
  });
  r.minimizer = ties.front();
  r.minimizer_count = ties.size();
  r.unique = ties.size() == 1;
  r.truth_mass = 1.0;
  for (const auto& t : ties) r.truth_mass = std::min(r.truth_mass, t[static_cast<std::size_t>(truth)]);
  r.at_truth_vertex = r.unique && r.minimizer[static_cast<std::size_t>(truth)] == 1.0;
  r.l2_at_minimizer = theorem_l2(profile, r.minimizer);
  r.l2_minimized_there = detail::close(r.l2_at_minimizer, r.l2_min);
  return r;
}

struct CorollaryReport {
  std::vector<int> lambdas;
  std::vector<double> truth_mass;
  bool non_decreasing = true;
};

/// Ground-truth mass of the L_1 minimizer as lambda grows.
inline CorollaryReport corollary_sweep(int dims, const std::vector<ProfileEntry>& profile, int lambda_lo, int lambda_hi,
                                       double grid_step) {
  CorollaryReport c;
  for (int l = lambda_lo; l <= lambda_hi; ++l) {
    const auto r = verify_powered_minimizer(dims, profile, l, grid_step);
    if (!c.truth_mass.empty() && r.truth_mass < c.truth_mass.back()) c.non_decreasing = false;
    c.lambdas.push_back(l);
    c.truth_mass.push_back(r.truth_mass);
  }
  return c;
}

}  // namespace gpcd
