#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "symsel/error.hpp"
#include "symsel/graph.hpp"
#include "symsel/rng.hpp"

namespace symsel {

inline constexpr std::size_t kCutNormExhaustiveLimit = 14;
inline constexpr std::size_t kCutNormRestarts = 64;
inline constexpr std::size_t kCutDistanceLimit = 8;

// Step graphon on the equipartition of [0,1] into K intervals.
struct StepGraphon {
  Eigen::MatrixXd values;

  std::size_t k() const { return static_cast<std::size_t>(values.rows()); }

  double operator()(double x, double y) const {
    const auto kk = static_cast<double>(values.rows());
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(x * kk), values.rows() - 1);
    const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(y * kk), values.cols() - 1);
    return values(i, j);
  }
};

inline StepGraphon induce_graphon(const Graph& g) { return StepGraphon{g.adjacency()}; }

// Blow-up with node labels taken from `assignment`: nodes u, v get a[C(u), C(v)].
inline Eigen::MatrixXd blow_up_adjacency(const CoarseGraph& gc, const ClusterAssignment& assignment) {
  if (assignment.m() != gc.m()) throw ValidationError("blow-up: assignment and coarse graph disagree on M");
  for (std::size_t c = 0; c < gc.m(); ++c) {
    if (assignment.sizes()[c] != gc.counts()[c])
      throw ValidationError("blow-up: cluster " + std::to_string(c + 1) + " size differs from q_m");
  }
  const auto n = static_cast<Eigen::Index>(assignment.n());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = 0; v < n; ++v)
      out(u, v) = gc.adjacency()(assignment.cluster_of(static_cast<std::size_t>(u)),
                                 assignment.cluster_of(static_cast<std::size_t>(v)));
  return out;
}

// Canonical layout: the q_0 nodes of coarse node 0 first, then coarse node 1, ...
inline ClusterAssignment canonical_assignment(const CoarseGraph& gc) {
  std::vector<int> labels;
  labels.reserve(gc.fine_n());
  for (std::size_t m = 0; m < gc.m(); ++m) labels.insert(labels.end(), gc.counts()[m], static_cast<int>(m));
  return ClusterAssignment(std::move(labels), gc.m());
}

inline Graph blow_up(const CoarseGraph& gc) { return Graph(blow_up_adjacency(gc, canonical_assignment(gc))); }

inline Graph blow_up(const CoarseGraph& gc, const ClusterAssignment& assignment) {
  return Graph(blow_up_adjacency(gc, assignment));
}

// Block-average coarsening: a'[m, m'] is the mean of A over all c_m * c_m' entries.
inline CoarseGraph coarsen(const Graph& g, const ClusterAssignment& assignment) {
  if (assignment.n() != g.n()) {
    throw ValidationError("coarsen: assignment covers " + std::to_string(assignment.n()) + " nodes, graph has " +
                          std::to_string(g.n()));
  }
  const std::size_t m = assignment.m();
  for (std::size_t c = 0; c < m; ++c) {
    if (assignment.sizes()[c] == 0) throw ValidationError("coarsen: cluster " + std::to_string(c + 1) + " is empty");
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  const auto& a = g.adjacency();
  for (Eigen::Index u = 0; u < a.rows(); ++u)
    for (Eigen::Index v = 0; v < a.cols(); ++v)
      sum(assignment.cluster_of(static_cast<std::size_t>(u)), assignment.cluster_of(static_cast<std::size_t>(v))) +=
          a(u, v);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = 0; q < m; ++q)
      sum(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) /=
          static_cast<double>(assignment.sizes()[p] * assignment.sizes()[q]);
  // symmetrize the rounding: block sums are accumulated in different orders
  Eigen::MatrixXd avg = 0.5 * (sum + sum.transpose());
  return CoarseGraph(std::move(avg), assignment.sizes());
}

struct CutNormResult {
  double value = 0.0;
  // true: exact maximum; false: heuristic lower bound on the cut norm.
  bool exact = true;
};

namespace detail {

inline double subset_block_sum(const Eigen::MatrixXd& w, const std::vector<char>& s, const std::vector<char>& t) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    if (!s[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (t[static_cast<std::size_t>(j)]) acc += w(i, j);
  }
  return acc;
}

}  // namespace detail

// max_{S,T} |sum_{S x T} W| / K^2. For fixed S the best T takes every column
// whose partial sum has the wanted sign, so only the 2^K row subsets are searched.
inline double cut_norm_exact(const Eigen::MatrixXd& values, std::size_t limit = kCutNormExhaustiveLimit) {
  if (values.rows() != values.cols()) throw ValidationError("cut norm: matrix must be square");
  const auto k = static_cast<std::size_t>(values.rows());
  if (k > limit) {
    throw ValidationError("cut norm: K = " + std::to_string(k) + " exceeds exhaustive limit " + std::to_string(limit) +
                          "; use heuristic mode");
  }
  if (k == 0) return 0.0;
  double best = 0.0;
  std::vector<double> col(k);
  const std::uint64_t subsets = std::uint64_t{1} << k;
  for (std::uint64_t mask = 1; mask < subsets; ++mask) {
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (std::size_t j = 0; j < k; ++j) col[j] += values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    double pos = 0.0, neg = 0.0;
    for (double c : col) (c > 0.0 ? pos : neg) += c;
    best = std::max({best, pos, -neg});
  }
  return best / static_cast<double>(k * k);
}

// Alternating sign maximization from random starts. Every reported value is
// attained by an explicit (S, T), so the result never exceeds the exact norm.
inline double cut_norm_heuristic(const Eigen::MatrixXd& values, std::size_t restarts = kCutNormRestarts,
                                 std::uint64_t seed = 0) {
  if (values.rows() != values.cols()) throw ValidationError("cut norm: matrix must be square");
  const auto k = static_cast<std::size_t>(values.rows());
  if (k == 0) return 0.0;
  double best = 0.0;
  std::vector<char> s(k), t(k);
  for (std::size_t r = 0; r < restarts; ++r) {
    Philox4x32 rng(seed, r);
    for (double sign : {1.0, -1.0}) {
      for (std::size_t i = 0; i < k; ++i) s[i] = static_cast<char>(rng() & 1u);
      double prev = -1.0;
      for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t j = 0; j < k; ++j) {
          double c = 0.0;
          for (std::size_t i = 0; i < k; ++i)
            if (s[i]) c += values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          t[j] = static_cast<char>(sign * c > 0.0);
        }
        for (std::size_t i = 0; i < k; ++i) {
          double rsum = 0.0;
          for (std::size_t j = 0; j < k; ++j)
            if (t[j]) rsum += values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          s[i] = static_cast<char>(sign * rsum > 0.0);
        }
        const double v = sign * detail::subset_block_sum(values, s, t);
        if (v <= prev) break;
        prev = v;
      }
      best = std::max(best, std::abs(detail::subset_block_sum(values, s, t)));
    }
  }
  return best / static_cast<double>(k * k);
}

// Exact when K fits the exhaustive limit, heuristic lower bound otherwise.
inline CutNormResult cut_norm(const Eigen::MatrixXd& values, std::size_t limit = kCutNormExhaustiveLimit) {
  if (static_cast<std::size_t>(values.rows()) <= limit) return {cut_norm_exact(values, limit), true};
  return {cut_norm_heuristic(values), false};
}

// Cut norm of W_G - W_{G'} aligned by the given cluster assignment. With an
// exact cut norm this is an upper bound on the cut distance delta_box.
inline CutNormResult coarsening_error(const Graph& g, const CoarseGraph& gc, const ClusterAssignment& assignment,
                                      std::size_t limit = kCutNormExhaustiveLimit) {
  if (assignment.n() != g.n()) throw ValidationError("coarsening error: assignment does not cover the graph");
  const Eigen::MatrixXd residual = g.adjacency() - blow_up_adjacency(gc, assignment);
  return cut_norm(residual, limit);
}

// min over node permutations Pi of ||A_1 - Pi A_2 Pi^T||_box, for n <= 8.
inline double cut_distance_exhaustive(const Graph& g1, const Graph& g2, std::size_t limit = kCutDistanceLimit) {
  if (g1.n() != g2.n()) throw ValidationError("cut distance: graphs have different node counts");
  const std::size_t n = g1.n();
  if (n > limit) {
    throw ValidationError("cut distance: n = " + std::to_string(n) + " exceeds exhaustive limit " +
                          std::to_string(limit));
  }
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd permuted(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  do {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        permuted(p[i], p[j]) = g2.adjacency()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    best = std::min(best, cut_norm_exact(g1.adjacency() - permuted));
    if (best == 0.0) break;
  } while (std::next_permutation(p.begin(), p.end()));
  return n == 0 ? 0.0 : best;
}

}  // namespace symsel
