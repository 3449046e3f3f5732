#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "symsel/error.hpp"
#include "symsel/graph.hpp"
#include "symsel/perm.hpp"

namespace symsel {

// Partition of [N] x [N] into weight-sharing classes. For group-derived
// patterns the classes are the orbits of (i, j) -> (g(i), g(j)).
struct SharingPattern {
  std::size_t n = 0;
  std::vector<int> orbit_of;  // row-major n x n
  std::size_t orbit_count = 0;

  int at(std::size_t i, std::size_t j) const { return orbit_of[i * n + j]; }
};

using PairOrbitPartition = SharingPattern;

namespace detail {

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

  // Class ids 0.. in order of first appearance.
  std::pair<std::vector<int>, std::size_t> labels() {
    std::vector<int> out(parent_.size());
    std::unordered_map<std::size_t, int> id;
    for (std::size_t i = 0; i < parent_.size(); ++i) {
      auto [it, fresh] = id.try_emplace(find(i), static_cast<int>(id.size()));
      out[i] = it->second;
    }
    return {std::move(out), id.size()};
  }

private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

// Pair orbits from generators alone; works for groups too large to enumerate.
inline SharingPattern pair_orbits_from_generators(std::size_t n, std::span<const Permutation> generators) {
  detail::UnionFind uf(n * n);
  for (const auto& g : generators) {
    if (g.degree() != n) throw ValidationError("pair orbits: generator degree differs from N");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        uf.unite(i * n + j, static_cast<std::size_t>(g(i)) * n + static_cast<std::size_t>(g(j)));
  }
  auto [labels, count] = uf.labels();
  return SharingPattern{n, std::move(labels), count};
}

inline PairOrbitPartition pair_orbits(const PermGroup& g) {
  auto p = pair_orbits_from_generators(g.n(), g.generators());
  const std::size_t burnside = char_inner_product(g, 1, 1);
  if (p.orbit_count != burnside) {
    throw ConsistencyError("pair orbit count " + std::to_string(p.orbit_count) + " differs from Burnside count " +
                           std::to_string(burnside));
  }
  return p;
}

// f[i,i] = a_i, f[i,j] = b_i: per-row sharing with 2n scalars. Not
// equivariant under any nontrivial group; for n = 1 the b class is unused.
inline SharingPattern relax_pattern(std::size_t n) {
  if (n < 1) throw ValidationError("relax pattern: n must be >= 1");
  SharingPattern p{n, std::vector<int>(n * n), 2 * n};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p.orbit_of[i * n + j] = static_cast<int>(i == j ? i : n + i);
  return p;
}

// Linear map R^{N x d} -> R^{N x k} with block (i, j) = weights[orbit(i, j)] (k x d).
struct LayerPattern {
  SharingPattern partition;
  std::size_t d = 1;
  std::size_t k = 1;
  std::vector<Eigen::MatrixXd> weights;

  static LayerPattern zeros(SharingPattern partition, std::size_t d, std::size_t k) {
    LayerPattern p{std::move(partition), d, k, {}};
    p.weights.assign(p.partition.orbit_count,
                     Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)));
    return p;
  }

  std::size_t parameter_count() const { return partition.orbit_count * d * k; }
};

// Dense Nk x Nd operator; rows are (node, out channel), columns (node, in channel).
inline Eigen::MatrixXd materialize(const LayerPattern& p) {
  const std::size_t n = p.partition.n;
  if (p.weights.size() != p.partition.orbit_count) {
    throw ValidationError("materialize: " + std::to_string(p.weights.size()) + " weight blocks for " +
                          std::to_string(p.partition.orbit_count) + " orbits");
  }
  const auto d = static_cast<Eigen::Index>(p.d), k = static_cast<Eigen::Index>(p.k);
  for (const auto& w : p.weights) {
    if (w.rows() != k || w.cols() != d) throw ValidationError("materialize: weight block shape is not k x d");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n) * k, static_cast<Eigen::Index>(n) * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.block(static_cast<Eigen::Index>(i) * k, static_cast<Eigen::Index>(j) * d, k, d) =
          p.weights[static_cast<std::size_t>(p.partition.at(i, j))];
  return out;
}

// P_g (x) I_c acting on node-major vectors of length N c.
inline Eigen::MatrixXd block_permutation_matrix(const Permutation& g, std::size_t c) {
  const auto n = static_cast<Eigen::Index>(g.degree());
  const auto cc = static_cast<Eigen::Index>(c);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * cc, n * cc);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < cc; ++a) m(g(static_cast<std::size_t>(i)) * cc + a, i * cc + a) = 1.0;
  return m;
}

namespace detail {

inline void check_theta_shape(const Eigen::MatrixXd& theta, std::size_t n, std::size_t d, std::size_t k) {
  if (theta.rows() != static_cast<Eigen::Index>(n * d) || theta.cols() != static_cast<Eigen::Index>(n * k)) {
    throw ValidationError("theta is " + std::to_string(theta.rows()) + " x " + std::to_string(theta.cols()) +
                          ", expected Nd x Nk = " + std::to_string(n * d) + " x " + std::to_string(n * k));
  }
}

}  // namespace detail

// Psi_G(Theta) = (1/|G|) sum_g phi(g) Theta psi(g^-1), phi = P_g (x) I_d,
// psi = P_g (x) I_k, with Theta of shape Nd x Nk (prediction Theta^T x).
inline Eigen::MatrixXd intertwiner_project(const Eigen::MatrixXd& theta, const PermGroup& g, std::size_t d,
                                           std::size_t k) {
  const std::size_t n = g.n();
  detail::check_theta_shape(theta, n, d, k);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  for (const auto& e : g.elements()) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto gi = static_cast<Eigen::Index>(e(i));
      for (std::size_t j = 0; j < n; ++j) {
        const auto gj = static_cast<Eigen::Index>(e(j));
        acc.block(gi * static_cast<Eigen::Index>(d), gj * static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d),
                  static_cast<Eigen::Index>(k)) +=
            theta.block(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(j * k),
                        static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
      }
    }
  }
  return acc / static_cast<double>(g.order());
}

inline Eigen::MatrixXd anti_part(const Eigen::MatrixXd& theta, const PermGroup& g, std::size_t d, std::size_t k) {
  return theta - intertwiner_project(theta, g, d, k);
}

// Orthogonal projection onto matrices constant on pair orbits (block-wise
// mean over each orbit). Equals intertwiner_project for the same group.
inline Eigen::MatrixXd project_via_orbits(const Eigen::MatrixXd& theta, const SharingPattern& orbits, std::size_t d,
                                          std::size_t k) {
  const std::size_t n = orbits.n;
  detail::check_theta_shape(theta, n, d, k);
  const auto dd = static_cast<Eigen::Index>(d), kk = static_cast<Eigen::Index>(k);
  std::vector<Eigen::MatrixXd> sums(orbits.orbit_count, Eigen::MatrixXd::Zero(dd, kk));
  std::vector<std::size_t> counts(orbits.orbit_count, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto o = static_cast<std::size_t>(orbits.at(i, j));
      sums[o] += theta.block(static_cast<Eigen::Index>(i) * dd, static_cast<Eigen::Index>(j) * kk, dd, kk);
      ++counts[o];
    }
  Eigen::MatrixXd out(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto o = static_cast<std::size_t>(orbits.at(i, j));
      out.block(static_cast<Eigen::Index>(i) * dd, static_cast<Eigen::Index>(j) * kk, dd, kk) =
          sums[o] / static_cast<double>(counts[o]);
    }
  return out;
}

// Character table and isotypic bases of an elementary abelian 2-group.
struct IsotypicBasis {
  // Minimal generating set; character c maps basis element b to (-1)^{bit b of c}.
  std::vector<Permutation> basis_elements;
  // characters[c][e] = chi_c(g.elements()[e]) in {+1, -1}; row 0 is trivial.
  std::vector<std::vector<int>> characters;
  // P_chi = (1/|G|) sum_g chi(g) P_g
  std::vector<Eigen::MatrixXd> projectors;
  // Orthonormal column basis of range(P_chi); may have zero columns.
  std::vector<Eigen::MatrixXd> blocks;

  std::size_t parameter_count() const {
    std::size_t s = 0;
    for (const auto& b : blocks) s += static_cast<std::size_t>(b.cols() * b.cols());
    return s;
  }
};

inline IsotypicBasis isotypic_basis(const PermGroup& g) {
  const std::size_t n = g.n();
  for (const auto& e : g.elements()) {
    if (!compose(e, e).is_identity()) {
      throw UnsupportedGroupError("isotypic basis needs an elementary abelian 2-group; element " + e.cycle_string() +
                                  " has order > 2 (use pair_orbits for general groups)");
    }
  }
  // coordinates of every element over a greedily chosen basis
  IsotypicBasis out;
  std::unordered_map<Permutation, unsigned, PermutationHash> coord{{Permutation::identity(n), 0u}};
  for (const auto& e : g.elements()) {
    if (coord.count(e)) continue;
    const unsigned bit = 1u << out.basis_elements.size();
    out.basis_elements.push_back(e);
    std::vector<std::pair<Permutation, unsigned>> fresh;
    for (const auto& [h, c] : coord) fresh.emplace_back(compose(h, e), c | bit);
    for (auto& [h, c] : fresh) coord.emplace(std::move(h), c);
  }
  const std::size_t chars = std::size_t{1} << out.basis_elements.size();
  const auto nn = static_cast<Eigen::Index>(n);
  for (std::size_t c = 0; c < chars; ++c) {
    std::vector<int> row;
    Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(nn, nn);
    for (const auto& e : g.elements()) {
      const int chi = (std::popcount(static_cast<unsigned>(c) & coord.at(e)) % 2) ? -1 : 1;
      row.push_back(chi);
      for (std::size_t i = 0; i < n; ++i) proj(e(i), static_cast<Eigen::Index>(i)) += chi;
    }
    proj /= static_cast<double>(g.order());
    // Gram-Schmidt over the columns of P_chi, in column order
    std::vector<Eigen::VectorXd> cols;
    for (Eigen::Index j = 0; j < nn; ++j) {
      Eigen::VectorXd v = proj.col(j);
      for (const auto& q : cols) v -= q.dot(v) * q;
      const double norm = v.norm();
      if (norm > 1e-10) cols.push_back(v / norm);
    }
    Eigen::MatrixXd block(nn, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) block.col(static_cast<Eigen::Index>(j)) = cols[j];
    out.characters.push_back(std::move(row));
    out.projectors.push_back(std::move(proj));
    out.blocks.push_back(std::move(block));
  }
  return out;
}

// Projection onto equivariant N x N maps via isotypic blocks: sum_chi P_chi Theta P_chi.
inline Eigen::MatrixXd isotypic_project(const IsotypicBasis& basis, const Eigen::MatrixXd& theta) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  for (const auto& b : basis.blocks) {
    if (b.cols() == 0) continue;
    const Eigen::MatrixXd p = b * b.transpose();
    out += p * theta * p;
  }
  return out;
}

// Constrained block form over clusters:
//   f_kk = a_k I + b_k 1 1^T,   f_kl = e_kl 1 1^T (k != l),
// with ties a_k = a_{h(k)}, b_k = b_{h(k)}, e_kl = e_{h(k) h(l)} for every h
// in the coarse symmetry group. The diagonal of block k carries a_k + b_k.
class BlockFormPattern {
public:
  BlockFormPattern(ClusterAssignment assignment, const PermGroup& coarse_aut)
      : assignment_(std::move(assignment)), m_(assignment_.m()) {
    if (coarse_aut.n() != m_) {
      throw ValidationError("block form: coarse symmetry acts on " + std::to_string(coarse_aut.n()) +
                            " labels but there are " + std::to_string(m_) + " clusters");
    }
    detail::UnionFind uf(scalar_count());
    for (const auto& h : coarse_aut.generators()) {
      for (std::size_t k = 0; k < m_; ++k) {
        const auto hk = static_cast<std::size_t>(h(k));
        if (assignment_.sizes()[k] != assignment_.sizes()[hk]) {
          throw ValidationError("block form: non-uniform cluster sizes on a coarse orbit (clusters " +
                                std::to_string(k + 1) + " and " + std::to_string(hk + 1) + ")");
        }
        tie(uf, a_index(k), a_index(hk));
        tie(uf, b_index(k), b_index(hk));
        for (std::size_t l = 0; l < m_; ++l)
          if (l != k) tie(uf, e_index(k, l), e_index(hk, static_cast<std::size_t>(h(l))));
      }
    }
    std::tie(class_of_, free_count_) = uf.labels();
  }

  std::size_t m() const { return m_; }
  const ClusterAssignment& assignment() const { return assignment_; }

  // Raw scalars before ties: M a's, M b's, M(M-1) e's.
  std::size_t scalar_count() const { return 2 * m_ + m_ * (m_ - 1); }
  std::size_t free_scalar_count() const { return free_count_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& ties() const { return ties_; }
  int class_of(std::size_t scalar) const { return class_of_[scalar]; }

  std::size_t a_index(std::size_t k) const { return k; }
  std::size_t b_index(std::size_t k) const { return m_ + k; }
  std::size_t e_index(std::size_t k, std::size_t l) const { return 2 * m_ + k * (m_ - 1) + (l < k ? l : l - 1); }

  // N x N matrix from one value per free class.
  Eigen::MatrixXd materialize(std::span<const double> free_values) const {
    if (free_values.size() != free_count_) {
      throw ValidationError("block form: expected " + std::to_string(free_count_) + " free scalars, got " +
                            std::to_string(free_values.size()));
    }
    auto val = [&](std::size_t scalar) { return free_values[static_cast<std::size_t>(class_of_[scalar])]; };
    const auto n = static_cast<Eigen::Index>(assignment_.n());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
      const auto cu = static_cast<std::size_t>(assignment_.cluster_of(static_cast<std::size_t>(u)));
      for (Eigen::Index v = 0; v < n; ++v) {
        const auto cv = static_cast<std::size_t>(assignment_.cluster_of(static_cast<std::size_t>(v)));
        if (cu != cv) {
          out(u, v) = val(e_index(cu, cv));
        } else {
          out(u, v) = val(b_index(cu)) + (u == v ? val(a_index(cu)) : 0.0);
        }
      }
    }
    return out;
  }

private:
  void tie(detail::UnionFind& uf, std::size_t x, std::size_t y) {
    if (x == y) return;
    if (uf.find(x) != uf.find(y)) ties_.emplace_back(std::min(x, y), std::max(x, y));
    uf.unite(x, y);
  }

  ClusterAssignment assignment_;
  std::size_t m_;
  std::vector<std::pair<std::size_t, std::size_t>> ties_;
  std::vector<int> class_of_;
  std::size_t free_count_ = 0;
};

inline BlockFormPattern block_form(const ClusterAssignment& assignment, const PermGroup& coarse_aut) {
  return BlockFormPattern(assignment, coarse_aut);
}

inline BlockFormPattern block_form(const ClusterAssignment& assignment) {
  return BlockFormPattern(assignment, trivial_group(assignment.m()));
}

// max over generators of |(P_g (x) I_k) L - L (P_g (x) I_d)|.
inline double equivariance_defect(const Eigen::MatrixXd& op, std::span<const Permutation> generators, std::size_t d,
                                  std::size_t k) {
  double worst = 0.0;
  for (const auto& g : generators) {
    const Eigen::MatrixXd lhs = block_permutation_matrix(g, k) * op;
    const Eigen::MatrixXd rhs = op * block_permutation_matrix(g, d);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace symsel
