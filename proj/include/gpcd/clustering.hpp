#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "gpcd/error.hpp"
#include "gpcd/rng.hpp"
#include "gpcd/tensor.hpp"

namespace gpcd {

struct ClusterResult {
  Tensor centers;                 // k x H
  std::vector<int> assignments;   // cluster index per point
  double amse = 0.0;              // total squared distance / point count
  std::size_t iterations = 0;
  std::vector<double> sse_history;  // total squared error after each assignment step

  std::size_t k() const noexcept { return centers.rows(); }
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Nearest-center assignment (ties to the lowest index). Returns the number of changed labels.
inline std::size_t assign_points(const Tensor& pts, const Tensor& centers, std::vector<int>& labels,
                                 std::vector<double>& dist, double& sse) {
  std::size_t changed = 0;
  sse = 0.0;
  const std::size_t h = pts.cols();
  for (std::size_t p = 0; p < pts.rows(); ++p) {
    const double* x = pts.row(p).data();
    int best = 0;
    double best_d = sq_dist(x, centers.row(0).data(), h);
    for (std::size_t j = 1; j < centers.rows(); ++j) {
      const double d = sq_dist(x, centers.row(j).data(), h);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (labels[p] != best) ++changed;
    labels[p] = best;
    dist[p] = best_d;
    sse += best_d;
  }
  return changed;
}

inline Tensor kmeanspp_init(const Tensor& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.rows(), h = pts.cols();
  Tensor centers(k, h);
  std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
  auto copy_row = [&](std::size_t from, std::size_t to) {
    std::copy(pts.row(from).begin(), pts.row(from).end(), centers.row(to).begin());
  };
  copy_row(uniform(rng), 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      d2[p] = std::min(d2[p], sq_dist(pts.row(p).data(), centers.row(j - 1).data(), h));
      total += d2[p];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      chosen = n - 1;
      for (std::size_t p = 0; p < n; ++p) {
        acc += d2[p];
        if (acc > target && d2[p] > 0.0) {
          chosen = p;
          break;
        }
      }
    } else {
      chosen = uniform(rng);
    }
    copy_row(chosen, j);
  }
  return centers;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops at an assignment fixpoint or after
/// `max_iters` center updates. Empty clusters are re-seeded at the farthest point.
inline ClusterResult kmeans(const Tensor& points, std::size_t k, std::size_t max_iters = 100,
                            std::uint64_t seed = 0) {
  const std::size_t n = points.rows(), h = points.cols();
  if (k == 0 || k > n) fail(Errc::KExceedsPoints, "k=" + std::to_string(k) + " with " + std::to_string(n) + " points");
  Rng rng = make_rng(seed, 0x6b6d65616e73ULL + k);
  ClusterResult r;
  r.centers = detail::kmeanspp_init(points, k, rng);
  r.assignments.assign(n, -1);
  std::vector<double> dist(n, 0.0);
  double sse = 0.0;
  detail::assign_points(points, r.centers, r.assignments, dist, sse);
  r.sse_history.push_back(sse);

  std::vector<double> sums(k * h);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      const auto c = static_cast<std::size_t>(r.assignments[p]);
      ++counts[c];
      const double* x = points.row(p).data();
      for (std::size_t f = 0; f < h; ++f) sums[c * h + f] += x[f];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t f = 0; f < h; ++f) r.centers(c, f) = sums[c * h + f] / static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t p = 0; p < n; ++p)
        if (!taken[p] && dist[p] > far_d) {
          far_d = dist[p];
          far = p;
        }
      taken[far] = true;
      dist[far] = 0.0;
      std::copy(points.row(far).begin(), points.row(far).end(), r.centers.row(c).begin());
    }
    const std::size_t changed = detail::assign_points(points, r.centers, r.assignments, dist, sse);
    r.sse_history.push_back(sse);
    r.iterations = it + 1;
    if (changed == 0) break;
  }
  r.amse = sse / static_cast<double>(n);
  return r;
}

struct ElbowOptions {
  double alpha = 0.28;
  std::size_t k_step = 10;
  std::size_t max_iters = 100;
  std::size_t max_k = 0;  // 0: bounded only by the point count
  std::uint64_t seed = 0;
};

struct ElbowRound {
  std::size_t k;
  double amse;
  double best_amse;
};

struct ElbowResult {
  ClusterResult best;
  std::vector<ElbowRound> rounds;
};

/// k = 1, 11, 21, ... until the best AMSE so far drops below alpha or k would exceed the
/// point count (or max_k); returns the best clustering seen.
inline ElbowResult elbow_cluster(const Tensor& points, const ElbowOptions& opt = {}) {
  if (!(opt.alpha > 0.0)) fail(Errc::InvalidConfig, "alpha must be positive");
  if (points.rows() == 0) fail(Errc::KExceedsPoints, "no points to cluster");
  ElbowResult out;
  std::size_t limit = points.rows();
  if (opt.max_k > 0) limit = std::min(limit, opt.max_k);
  for (std::size_t k = 1; k <= limit; k += opt.k_step) {
    ClusterResult r = kmeans(points, k, opt.max_iters, opt.seed);
    const double amse = r.amse;
    if (out.rounds.empty() || amse < out.best.amse) out.best = std::move(r);
    out.rounds.push_back({k, amse, out.best.amse});
    if (out.best.amse < opt.alpha) break;
  }
  return out;
}

}  // namespace gpcd
