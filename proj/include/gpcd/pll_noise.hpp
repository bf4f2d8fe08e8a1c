#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "gpcd/error.hpp"
#include "gpcd/graph.hpp"
#include "gpcd/rng.hpp"

namespace gpcd {

namespace detail {

inline Dataset with_candidates(const Dataset& ds, std::uint64_t seed,
                               const std::function<std::vector<int>(const PLLSample&, Rng&)>& draw) {
  Dataset out = ds;
  std::size_t common_k = 0;
  bool uniform_k = true;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    PLLSample& s = out.samples[i];
    Rng rng = make_rng(sub_seed(seed, 0x706c6c6e6f697365ULL), i);
    std::vector<int> labels = draw(s, rng);
    std::sort(labels.begin(), labels.end());
    s.candidates = CandidateLabelSet{std::move(labels), ds.num_classes};
    if (i == 0) common_k = s.candidates.size();
    uniform_k = uniform_k && s.candidates.size() == common_k;
  }
  out.candidate_count = uniform_k ? static_cast<int>(common_k) : 0;
  return out;
}

}  // namespace detail

/// Ground truth plus K-1 distractors drawn uniformly without replacement from the other classes.
inline Dataset add_random_pll(const Dataset& ds, int k, std::uint64_t seed) {
  if (k > ds.num_classes) fail(Errc::KTooLarge, "K=" + std::to_string(k) + " > D=" + std::to_string(ds.num_classes));
  if (k < 1) fail(Errc::InvalidConfig, "K must be >= 1");
  const int d = ds.num_classes;
  return detail::with_candidates(ds, seed, [k, d](const PLLSample& s, Rng& rng) {
    std::vector<int> others;
    for (int c = 0; c < d; ++c)
      if (c != s.ground_truth) others.push_back(c);
    std::vector<int> labels{s.ground_truth};
    // Partial Fisher-Yates: the first K-1 slots form a uniform sample without replacement.
    for (int j = 0; j < k - 1; ++j) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(j), others.size() - 1);
      std::swap(others[static_cast<std::size_t>(j)], others[pick(rng)]);
      labels.push_back(others[static_cast<std::size_t>(j)]);
    }
    return labels;
  });
}

/// Each simulated annotator reports the truth with its accuracy, otherwise a uniformly chosen
/// wrong class; the candidate set is the deduplicated union of all reports.
inline Dataset add_annotator_pll(const Dataset& ds, const std::vector<double>& accuracies, std::uint64_t seed) {
  if (accuracies.empty()) fail(Errc::NoPerfectAnnotator, "no annotators");
  for (double a : accuracies)
    if (!(a >= 0.0 && a <= 1.0)) fail(Errc::InvalidConfig, "annotator accuracy outside [0,1]");
  if (std::none_of(accuracies.begin(), accuracies.end(), [](double a) { return a == 1.0; }))
    fail(Errc::NoPerfectAnnotator, "at least one annotator must have accuracy 1.0");
  const int d = ds.num_classes;
  return detail::with_candidates(ds, seed, [&accuracies, d](const PLLSample& s, Rng& rng) {
    std::set<int> union_set;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double acc : accuracies) {
      if (u(rng) < acc || d < 2) {
        union_set.insert(s.ground_truth);
      } else {
        std::uniform_int_distribution<int> wrong(0, d - 2);
        int c = wrong(rng);
        if (c >= s.ground_truth) ++c;
        union_set.insert(c);
      }
    }
    return std::vector<int>(union_set.begin(), union_set.end());
  });
}

/// Nearest class to `cls` along the semantic order: its predecessor, or the successor for the
/// first class in the order.
inline int semantic_neighbor(const std::vector<int>& semantic_order, int cls) {
  const auto it = std::find(semantic_order.begin(), semantic_order.end(), cls);
  const auto pos = static_cast<std::size_t>(it - semantic_order.begin());
  return pos == 0 ? semantic_order[1] : semantic_order[pos - 1];
}

/// Exactly one distractor (K = 2): the semantic neighbor with probability rho, otherwise a
/// uniform draw from the remaining non-true classes (the neighbor when none remain).
inline Dataset add_competitive_pll(const Dataset& ds, const std::vector<int>& semantic_order, double rho,
                                   std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) fail(Errc::InvalidRho, "rho=" + std::to_string(rho));
  const int d = ds.num_classes;
  if (d < 2) fail(Errc::InvalidConfig, "competitive noise needs D >= 2");
  std::vector<int> sorted = semantic_order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expected(static_cast<std::size_t>(d));
  std::iota(expected.begin(), expected.end(), 0);
  if (sorted != expected) fail(Errc::InvalidConfig, "semantic_order is not a permutation of the classes");

  return detail::with_candidates(ds, seed, [&semantic_order, rho, d](const PLLSample& s, Rng& rng) {
    const int near = semantic_neighbor(semantic_order, s.ground_truth);
    std::vector<int> rest;
    for (int c = 0; c < d; ++c)
      if (c != s.ground_truth && c != near) rest.push_back(c);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int distractor = near;
    if (!(u(rng) < rho) && !rest.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, rest.size() - 1);
      distractor = rest[pick(rng)];
    }
    return std::vector<int>{s.ground_truth, distractor};
  });
}

inline std::vector<int> identity_order(int num_classes) {
  std::vector<int> order(static_cast<std::size_t>(num_classes));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

}  // namespace gpcd
