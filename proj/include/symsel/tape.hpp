#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "symsel/equivmap.hpp"
#include "symsel/error.hpp"

namespace symsel {

using EdgeList = std::vector<std::pair<int, int>>;

// Reverse-accumulation record of a matrix-valued computation. Every node is
// computed by one function (compute) both when recorded and when replayed,
// so a replay with the same parameters is bit-identical.
//
// Parameterized ops read from the flat parameter vector the tape was created
// with; backward() refuses to run against a different vector.
class Tape {
public:
  using Id = std::size_t;

  enum class Op {
    constant,       // fixed matrix
    materialize,    // sharing pattern -> Nk x Nd operator from orbit weights
    edge_weights,   // n x n matrix with one parameter per support entry
    row_softmax,    // softmax over each row's support entries
    kron_identity,  // A (x) I_c
    kron_ones,      // A (x) 1_{r x c}
    matmul,
    hadamard,
    add_bias,  // per-channel bias broadcast over nodes and columns
    relu,
    mse,  // mean squared difference to a constant target
  };

  explicit Tape(Eigen::VectorXd params) : params_(std::move(params)) {}

  Id constant(Eigen::MatrixXd value) {
    Node n;
    n.op = Op::constant;
    n.fixed = std::move(value);
    return push(std::move(n));
  }

  Id materialize(std::shared_ptr<const SharingPattern> pattern, std::size_t d, std::size_t k, std::size_t offset) {
    Node n;
    n.op = Op::materialize;
    n.pattern = std::move(pattern);
    n.d = d;
    n.k = k;
    n.offset = offset;
    return push(std::move(n));
  }

  Id edge_weights(std::shared_ptr<const EdgeList> support, std::size_t size, std::size_t offset) {
    Node n;
    n.op = Op::edge_weights;
    n.support = std::move(support);
    n.d = size;
    n.offset = offset;
    return push(std::move(n));
  }

  Id row_softmax(Id a, std::shared_ptr<const EdgeList> support) {
    Node n;
    n.op = Op::row_softmax;
    n.a = a;
    n.support = std::move(support);
    return push(std::move(n));
  }

  Id kron_identity(Id a, std::size_t c) {
    Node n;
    n.op = Op::kron_identity;
    n.a = a;
    n.d = c;
    return push(std::move(n));
  }

  Id kron_ones(Id a, std::size_t r, std::size_t c) {
    Node n;
    n.op = Op::kron_ones;
    n.a = a;
    n.k = r;
    n.d = c;
    return push(std::move(n));
  }

  Id matmul(Id a, Id b) { return binary(Op::matmul, a, b); }
  Id hadamard(Id a, Id b) { return binary(Op::hadamard, a, b); }

  Id add_bias(Id a, std::size_t channels, std::size_t offset) {
    Node n;
    n.op = Op::add_bias;
    n.a = a;
    n.k = channels;
    n.offset = offset;
    return push(std::move(n));
  }

  Id relu(Id a) {
    Node n;
    n.op = Op::relu;
    n.a = a;
    return push(std::move(n));
  }

  Id mse(Id pred, Id target) { return binary(Op::mse, pred, target); }

  std::size_t size() const { return nodes_.size(); }
  const Eigen::MatrixXd& value(Id id) const { return values_.at(id); }
  const Eigen::VectorXd& params() const { return params_; }

  // Recomputes every node from `params` and returns all node values.
  std::vector<Eigen::MatrixXd> replay(const Eigen::VectorXd& params) const {
    std::vector<Eigen::MatrixXd> vals;
    vals.reserve(nodes_.size());
    for (const auto& n : nodes_) vals.push_back(compute(n, vals, params));
    return vals;
  }

  // Gradient of the scalar node `loss` with respect to the flat parameters.
  Eigen::VectorXd backward(Id loss, const Eigen::VectorXd& current_params) const {
    if (current_params.size() != params_.size() || current_params != params_) {
      throw StaleTapeError("tape was recorded with different parameters; record a new forward pass");
    }
    if (values_.at(loss).size() != 1) throw ValidationError("backward: node is not a scalar");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    std::vector<Eigen::MatrixXd> adj(nodes_.size());
    adj[loss] = Eigen::MatrixXd::Ones(1, 1);
    for (Id id = loss + 1; id-- > 0;) {
      if (adj[id].size() == 0) continue;
      propagate(id, adj, grad);
    }
    return grad;
  }

private:
  static constexpr Id kNone = static_cast<Id>(-1);

  struct Node {
    Op op = Op::constant;
    Id a = kNone;
    Id b = kNone;
    std::size_t d = 0;
    std::size_t k = 0;
    std::size_t offset = 0;
    std::shared_ptr<const SharingPattern> pattern;
    std::shared_ptr<const EdgeList> support;
    Eigen::MatrixXd fixed;
  };

  Id binary(Op op, Id a, Id b) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    return push(std::move(n));
  }

  Id push(Node n) {
    if ((n.a != kNone && n.a >= nodes_.size()) || (n.b != kNone && n.b >= nodes_.size()))
      throw ValidationError("tape: operand refers to a later node");
    values_.push_back(compute(n, values_, params_));
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  static Eigen::MatrixXd compute(const Node& n, const std::vector<Eigen::MatrixXd>& vals,
                                 const Eigen::VectorXd& params) {
    switch (n.op) {
      case Op::constant:
        return n.fixed;
      case Op::materialize: {
        const std::size_t nn = n.pattern->n;
        const auto k = static_cast<Eigen::Index>(n.k), d = static_cast<Eigen::Index>(n.d);
        Eigen::MatrixXd out(static_cast<Eigen::Index>(nn) * k, static_cast<Eigen::Index>(nn) * d);
        for (std::size_t i = 0; i < nn; ++i)
          for (std::size_t j = 0; j < nn; ++j) {
            const std::size_t base = n.offset + static_cast<std::size_t>(n.pattern->at(i, j)) * n.k * n.d;
            for (Eigen::Index a = 0; a < k; ++a)
              for (Eigen::Index b = 0; b < d; ++b)
                out(static_cast<Eigen::Index>(i) * k + a, static_cast<Eigen::Index>(j) * d + b) =
                    params(static_cast<Eigen::Index>(base + static_cast<std::size_t>(a * d + b)));
          }
        return out;
      }
      case Op::edge_weights: {
        const auto sz = static_cast<Eigen::Index>(n.d);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(sz, sz);
        for (std::size_t e = 0; e < n.support->size(); ++e) {
          const auto [i, j] = (*n.support)[e];
          out(i, j) = params(static_cast<Eigen::Index>(n.offset + e));
        }
        return out;
      }
      case Op::row_softmax: {
        const auto& x = vals[n.a];
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), x.cols());
        Eigen::VectorXd row_max = Eigen::VectorXd::Constant(x.rows(), -std::numeric_limits<double>::infinity());
        for (auto [i, j] : *n.support) row_max(i) = std::max(row_max(i), x(i, j));
        Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(x.rows());
        for (auto [i, j] : *n.support) {
          out(i, j) = std::exp(x(i, j) - row_max(i));
          row_sum(i) += out(i, j);
        }
        for (auto [i, j] : *n.support) out(i, j) /= row_sum(i);
        return out;
      }
      case Op::kron_identity: {
        const auto& x = vals[n.a];
        const auto c = static_cast<Eigen::Index>(n.d);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows() * c, x.cols() * c);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          for (Eigen::Index j = 0; j < x.cols(); ++j)
            for (Eigen::Index r = 0; r < c; ++r) out(i * c + r, j * c + r) = x(i, j);
        return out;
      }
      case Op::kron_ones: {
        const auto& x = vals[n.a];
        const auto r = static_cast<Eigen::Index>(n.k), c = static_cast<Eigen::Index>(n.d);
        Eigen::MatrixXd out(x.rows() * r, x.cols() * c);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          for (Eigen::Index j = 0; j < x.cols(); ++j) out.block(i * r, j * c, r, c).setConstant(x(i, j));
        return out;
      }
      case Op::matmul:
        if (vals[n.a].cols() != vals[n.b].rows()) throw ValidationError("tape: matmul shape mismatch");
        return vals[n.a] * vals[n.b];
      case Op::hadamard:
        if (vals[n.a].rows() != vals[n.b].rows() || vals[n.a].cols() != vals[n.b].cols())
          throw ValidationError("tape: hadamard shape mismatch");
        return vals[n.a].cwiseProduct(vals[n.b]);
      case Op::add_bias: {
        Eigen::MatrixXd out = vals[n.a];
        for (Eigen::Index r = 0; r < out.rows(); ++r)
          out.row(r).array() += params(static_cast<Eigen::Index>(n.offset + static_cast<std::size_t>(r) % n.k));
        return out;
      }
      case Op::relu:
        return vals[n.a].cwiseMax(0.0);
      case Op::mse: {
        const auto& p = vals[n.a];
        const auto& t = vals[n.b];
        if (p.rows() != t.rows() || p.cols() != t.cols()) throw ValidationError("tape: mse shape mismatch");
        Eigen::MatrixXd out(1, 1);
        out(0, 0) = (p - t).squaredNorm() / static_cast<double>(p.size());
        return out;
      }
    }
    throw ValidationError("tape: unknown op");
  }

  void accumulate(std::vector<Eigen::MatrixXd>& adj, Id id, const Eigen::MatrixXd& g) const {
    if (nodes_[id].op == Op::constant) return;
    if (adj[id].size() == 0) {
      adj[id] = g;
    } else {
      adj[id] += g;
    }
  }

  void propagate(Id id, std::vector<Eigen::MatrixXd>& adj, Eigen::VectorXd& grad) const {
    const Node& n = nodes_[id];
    const Eigen::MatrixXd& g = adj[id];
    switch (n.op) {
      case Op::constant:
        return;
      case Op::materialize: {
        const std::size_t nn = n.pattern->n;
        const auto k = static_cast<Eigen::Index>(n.k), d = static_cast<Eigen::Index>(n.d);
        for (std::size_t i = 0; i < nn; ++i)
          for (std::size_t j = 0; j < nn; ++j) {
            const std::size_t base = n.offset + static_cast<std::size_t>(n.pattern->at(i, j)) * n.k * n.d;
            for (Eigen::Index a = 0; a < k; ++a)
              for (Eigen::Index b = 0; b < d; ++b)
                grad(static_cast<Eigen::Index>(base + static_cast<std::size_t>(a * d + b))) +=
                    g(static_cast<Eigen::Index>(i) * k + a, static_cast<Eigen::Index>(j) * d + b);
          }
        return;
      }
      case Op::edge_weights:
        for (std::size_t e = 0; e < n.support->size(); ++e) {
          const auto [i, j] = (*n.support)[e];
          grad(static_cast<Eigen::Index>(n.offset + e)) += g(i, j);
        }
        return;
      case Op::row_softmax: {
        const auto& s = values_[id];
        Eigen::VectorXd dot = Eigen::VectorXd::Zero(s.rows());
        for (auto [i, j] : *n.support) dot(i) += s(i, j) * g(i, j);
        Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(s.rows(), s.cols());
        for (auto [i, j] : *n.support) ga(i, j) = s(i, j) * (g(i, j) - dot(i));
        accumulate(adj, n.a, ga);
        return;
      }
      case Op::kron_identity: {
        const auto& x = values_[n.a];
        const auto c = static_cast<Eigen::Index>(n.d);
        Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          for (Eigen::Index j = 0; j < x.cols(); ++j)
            for (Eigen::Index r = 0; r < c; ++r) ga(i, j) += g(i * c + r, j * c + r);
        accumulate(adj, n.a, ga);
        return;
      }
      case Op::kron_ones: {
        const auto& x = values_[n.a];
        const auto r = static_cast<Eigen::Index>(n.k), c = static_cast<Eigen::Index>(n.d);
        Eigen::MatrixXd ga(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          for (Eigen::Index j = 0; j < x.cols(); ++j) ga(i, j) = g.block(i * r, j * c, r, c).sum();
        accumulate(adj, n.a, ga);
        return;
      }
      case Op::matmul:
        accumulate(adj, n.a, g * values_[n.b].transpose());
        accumulate(adj, n.b, values_[n.a].transpose() * g);
        return;
      case Op::hadamard:
        accumulate(adj, n.a, g.cwiseProduct(values_[n.b]));
        accumulate(adj, n.b, g.cwiseProduct(values_[n.a]));
        return;
      case Op::add_bias:
        for (Eigen::Index r = 0; r < g.rows(); ++r)
          grad(static_cast<Eigen::Index>(n.offset + static_cast<std::size_t>(r) % n.k)) += g.row(r).sum();
        accumulate(adj, n.a, g);
        return;
      case Op::relu:
        accumulate(adj, n.a, g.cwiseProduct((values_[n.a].array() > 0.0).cast<double>().matrix()));
        return;
      case Op::mse: {
        const auto& p = values_[n.a];
        const auto& t = values_[n.b];
        accumulate(adj, n.a, (2.0 * g(0, 0) / static_cast<double>(p.size())) * (p - t));
        return;
      }
    }
  }

  Eigen::VectorXd params_;
  std::vector<Node> nodes_;
  std::vector<Eigen::MatrixXd> values_;
};

}  // namespace symsel
