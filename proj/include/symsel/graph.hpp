#pragma once

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include <cstddef>
#include <string>
#include <vector>

#include "symsel/error.hpp"

namespace symsel {

using Rational = boost::rational<long long>;

namespace detail {

inline void check_weighted_adjacency(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw ValidationError(std::string(what) + ": adjacency must be square");
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(std::string(what) + ": adjacency entry (" + std::to_string(i + 1) + ", " +
                              std::to_string(j + 1) + ") outside [0, 1]");
      }
      if (v != a(j, i)) {
        throw ValidationError(std::string(what) + ": adjacency not symmetric at (" + std::to_string(i + 1) +
                              ", " + std::to_string(j + 1) + ")");
      }
    }
  }
}

}  // namespace detail

// Edge-node weighted graph ([N], A, b).
class Graph {
public:
  Graph() = default;

  explicit Graph(Eigen::MatrixXd adjacency, std::vector<Rational> node_weights = {})
      : adjacency_(std::move(adjacency)), node_weights_(std::move(node_weights)) {
    detail::check_weighted_adjacency(adjacency_, "graph");
    const auto n = static_cast<std::size_t>(adjacency_.rows());
    if (node_weights_.empty()) node_weights_.assign(n, Rational(1));
    if (node_weights_.size() != n) throw ValidationError("graph: node_weights length differs from node count");
    for (const auto& w : node_weights_) {
      if (w <= 0) throw ValidationError("graph: node weights must be positive");
    }
  }

  std::size_t n() const { return static_cast<std::size_t>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  const std::vector<Rational>& node_weights() const { return node_weights_; }

  // Unweighted simple graph from a 0-based edge list.
  static Graph from_edges(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (auto [i, j] : edges) {
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
    return Graph(std::move(a));
  }

  static Graph path(std::size_t n) {
    std::vector<std::pair<int, int>> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(static_cast<int>(i), static_cast<int>(i + 1));
    return from_edges(n, e);
  }

  static Graph cycle(std::size_t n) {
    std::vector<std::pair<int, int>> e;
    for (std::size_t i = 0; i < n; ++i) e.emplace_back(static_cast<int>(i), static_cast<int>((i + 1) % n));
    return from_edges(n, e);
  }

  static Graph complete(std::size_t n) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.diagonal().setZero();
    return Graph(std::move(a));
  }

  // 4-neighbour grid; node index = row * side + col.
  static Graph grid(std::size_t side) {
    std::vector<std::pair<int, int>> e;
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const int v = static_cast<int>(r * side + c);
        if (c + 1 < side) e.emplace_back(v, v + 1);
        if (r + 1 < side) e.emplace_back(v, v + static_cast<int>(side));
      }
    }
    return from_edges(side * side, e);
  }

private:
  Eigen::MatrixXd adjacency_;
  std::vector<Rational> node_weights_;
};

// Node-to-cluster map C_{G -> G'} with M cluster labels.
class ClusterAssignment {
public:
  ClusterAssignment() = default;

  ClusterAssignment(std::vector<int> cluster_of, std::size_t m) : cluster_of_(std::move(cluster_of)), sizes_(m, 0) {
    for (std::size_t i = 0; i < cluster_of_.size(); ++i) {
      const int c = cluster_of_[i];
      if (c < 0 || static_cast<std::size_t>(c) >= m) {
        throw ValidationError("assignment: node " + std::to_string(i + 1) + " has cluster label out of range");
      }
      ++sizes_[static_cast<std::size_t>(c)];
    }
  }

  // M inferred as max label + 1.
  explicit ClusterAssignment(std::vector<int> cluster_of)
      : ClusterAssignment(cluster_of, infer_m(cluster_of)) {}

  static ClusterAssignment identity(std::size_t n) {
    std::vector<int> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<int>(i);
    return ClusterAssignment(std::move(c), n);
  }

  static ClusterAssignment single(std::size_t n) { return ClusterAssignment(std::vector<int>(n, 0), 1); }

  // Square patches of a side x side grid; cluster id = patch_row * (side / patch) + patch_col.
  static ClusterAssignment grid_patches(std::size_t side, std::size_t patch) {
    if (patch == 0 || side % patch != 0) {
      throw ValidationError("patch size " + std::to_string(patch) + " does not divide grid side " +
                            std::to_string(side));
    }
    const std::size_t per_row = side / patch;
    std::vector<int> c(side * side);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t col = 0; col < side; ++col)
        c[r * side + col] = static_cast<int>((r / patch) * per_row + col / patch);
    return ClusterAssignment(std::move(c), per_row * per_row);
  }

  std::size_t n() const { return cluster_of_.size(); }
  std::size_t m() const { return sizes_.size(); }
  int cluster_of(std::size_t node) const { return cluster_of_[node]; }
  const std::vector<int>& labels() const { return cluster_of_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  // Nodes of cluster `c` in ascending index order.
  std::vector<int> members(std::size_t c) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < cluster_of_.size(); ++i)
      if (static_cast<std::size_t>(cluster_of_[i]) == c) out.push_back(static_cast<int>(i));
    return out;
  }

private:
  static std::size_t infer_m(const std::vector<int>& c) {
    int mx = -1;
    for (int v : c) mx = std::max(mx, v);
    return static_cast<std::size_t>(mx + 1);
  }

  std::vector<int> cluster_of_;
  std::vector<std::size_t> sizes_;
};

// Edge-node weighted coarse graph G' with node weights q_m / N.
class CoarseGraph {
public:
  CoarseGraph() = default;

  CoarseGraph(Eigen::MatrixXd adjacency, std::vector<std::size_t> counts)
      : adjacency_(std::move(adjacency)), counts_(std::move(counts)) {
    detail::check_weighted_adjacency(adjacency_, "coarse graph");
    if (counts_.size() != static_cast<std::size_t>(adjacency_.rows()))
      throw ValidationError("coarse graph: counts length differs from node count");
    for (auto q : counts_) total_ += q;
    if (total_ == 0) throw ValidationError("coarse graph: node counts sum to zero");
  }

  std::size_t m() const { return counts_.size(); }
  std::size_t fine_n() const { return total_; }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  std::vector<Rational> node_weights() const {
    std::vector<Rational> w;
    w.reserve(counts_.size());
    for (auto q : counts_) w.emplace_back(static_cast<long long>(q), static_cast<long long>(total_));
    return w;
  }

private:
  Eigen::MatrixXd adjacency_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

}  // namespace symsel
