#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "symsel/error.hpp"
#include "symsel/graph.hpp"

namespace symsel {

inline constexpr std::size_t kDefaultElementCap = 10080;
inline constexpr std::size_t kDefaultSearchLimit = 12;

// A permutation of {0..N-1}; images[i] = g(i).
class Permutation {
public:
  Permutation() = default;

  explicit Permutation(std::vector<int> images) : images_(std::move(images)) {
    std::vector<char> seen(images_.size(), 0);
    for (int v : images_) {
      if (v < 0 || static_cast<std::size_t>(v) >= images_.size() || seen[static_cast<std::size_t>(v)]) {
        throw ValidationError("permutation images are not a bijection on {0.." +
                              std::to_string(images_.size() == 0 ? 0 : images_.size() - 1) + "}");
      }
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<int> im(n);
    std::iota(im.begin(), im.end(), 0);
    return Permutation(std::move(im), Unchecked{});
  }

  // 0-based transposition of a and b.
  static Permutation transposition(std::size_t n, int a, int b) {
    auto p = identity(n);
    std::swap(p.images_[static_cast<std::size_t>(a)], p.images_[static_cast<std::size_t>(b)]);
    return p;
  }

  // 0-based cycle c[0] -> c[1] -> ... -> c[0].
  static Permutation cycle(std::size_t n, const std::vector<int>& c) {
    auto p = identity(n);
    for (std::size_t i = 0; i < c.size(); ++i) p.images_[static_cast<std::size_t>(c[i])] = c[(i + 1) % c.size()];
    return Permutation(std::move(p.images_));
  }

  std::size_t degree() const { return images_.size(); }
  int operator()(std::size_t i) const { return images_[i]; }
  const std::vector<int>& images() const { return images_; }

  bool is_identity() const {
    for (std::size_t i = 0; i < images_.size(); ++i)
      if (images_[i] != static_cast<int>(i)) return false;
    return true;
  }

  Permutation inverse() const {
    std::vector<int> inv(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i) inv[static_cast<std::size_t>(images_[i])] = static_cast<int>(i);
    return Permutation(std::move(inv), Unchecked{});
  }

  // 1-indexed disjoint-cycle notation; the identity prints as "e".
  std::string cycle_string() const {
    std::string out;
    std::vector<char> done(images_.size(), 0);
    for (std::size_t s = 0; s < images_.size(); ++s) {
      if (done[s] || images_[s] == static_cast<int>(s)) continue;
      out += '(';
      std::size_t i = s;
      bool first = true;
      while (!done[i]) {
        done[i] = 1;
        if (!first) out += ' ';
        out += std::to_string(i + 1);
        first = false;
        i = static_cast<std::size_t>(images_[i]);
      }
      out += ')';
    }
    return out.empty() ? "e" : out;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation& a, const Permutation& b) { return a.images_ <=> b.images_; }

  friend Permutation compose(const Permutation& p, const Permutation& q);

private:
  struct Unchecked {};
  Permutation(std::vector<int> images, Unchecked) : images_(std::move(images)) {}

  std::vector<int> images_;
};

// r(i) = p(q(i)).
inline Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.degree() != q.degree()) {
    throw ValidationError("compose: degree mismatch (" + std::to_string(p.degree()) + " vs " +
                          std::to_string(q.degree()) + ")");
  }
  std::vector<int> r(q.degree());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = p.images_[static_cast<std::size_t>(q.images_[i])];
  return Permutation(std::move(r), Permutation::Unchecked{});
}

struct PermutationHash {
  std::size_t operator()(const Permutation& p) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (int v : p.images()) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::size_t fixed_points(const Permutation& p) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < p.degree(); ++i)
    if (p(i) == static_cast<int>(i)) ++c;
  return c;
}

// P with P e_i = e_{g(i)}, so (P x)[g(i)] = x[i].
inline Eigen::MatrixXd permutation_matrix(const Permutation& p) {
  const auto n = static_cast<Eigen::Index>(p.degree());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(p(static_cast<std::size_t>(i)), i) = 1.0;
  return m;
}

// A fully enumerated finite permutation group. Elements are stored in
// lexicographic order of their image vectors, so the identity comes first.
class PermGroup {
public:
  PermGroup() = default;

  std::size_t n() const { return n_; }
  std::size_t order() const { return elements_.size(); }
  const std::vector<Permutation>& elements() const { return elements_; }
  const std::vector<Permutation>& generators() const { return generators_; }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  bool contains(const Permutation& p) const { return index_.count(p) != 0; }

  bool is_subgroup_of(const PermGroup& other) const {
    if (other.n_ != n_) return false;
    return std::all_of(elements_.begin(), elements_.end(), [&](const auto& g) { return other.contains(g); });
  }

  bool is_trivial() const { return elements_.size() == 1; }

  friend PermGroup close(std::size_t n, const std::vector<Permutation>& generators, std::size_t cap,
                         std::string label);

private:
  std::size_t n_ = 0;
  std::vector<Permutation> elements_;
  std::vector<Permutation> generators_;
  std::unordered_set<Permutation, PermutationHash> index_;
  std::string label_;
};

// Smallest group containing `generators`, enumerated by breadth-first
// closure under right multiplication by generators.
inline PermGroup close(std::size_t n, const std::vector<Permutation>& generators,
                       std::size_t cap = kDefaultElementCap, std::string label = "closure") {
  if (cap < 1) throw ValidationError("element cap must be at least 1");
  for (const auto& g : generators) {
    if (g.degree() != n) {
      throw ValidationError("closure: generator " + g.cycle_string() + " has degree " + std::to_string(g.degree()) +
                            ", expected " + std::to_string(n));
    }
  }
  PermGroup grp;
  grp.n_ = n;
  grp.label_ = std::move(label);
  for (const auto& g : generators)
    if (!g.is_identity()) grp.generators_.push_back(g);

  std::vector<Permutation> found{Permutation::identity(n)};
  grp.index_.insert(found.front());
  for (std::size_t head = 0; head < found.size(); ++head) {
    for (const auto& s : grp.generators_) {
      Permutation next = compose(found[head], s);
      if (grp.index_.insert(next).second) {
        found.push_back(std::move(next));
        if (found.size() > cap) {
          throw CapacityError("group order exceeds element cap while closing " + grp.label_, cap);
        }
      }
    }
  }
  std::sort(found.begin(), found.end());
  grp.elements_ = std::move(found);
  return grp;
}

inline PermGroup trivial_group(std::size_t n) { return close(n, {}, 1, "trivial"); }

inline PermGroup full_symmetric_group(std::size_t n, std::size_t cap = kDefaultElementCap) {
  std::vector<Permutation> gens;
  if (n >= 2) {
    gens.push_back(Permutation::transposition(n, 0, 1));
    std::vector<int> c(n);
    std::iota(c.begin(), c.end(), 0);
    if (n >= 3) gens.push_back(Permutation::cycle(n, c));
  }
  return close(n, gens, cap, "S" + std::to_string(n));
}

// (d k / |G|) sum_g fix(g)^2; an integer for any genuine group.
inline std::size_t char_inner_product(const PermGroup& g, std::size_t d, std::size_t k) {
  if (d < 1 || k < 1) throw ValidationError("char_inner_product: channel counts must be >= 1");
  std::uint64_t s = 0;
  for (const auto& e : g.elements()) {
    const std::uint64_t f = fixed_points(e);
    s += f * f;
  }
  const std::uint64_t num = s * d * k;
  if (g.order() == 0 || num % g.order() != 0) {
    throw ConsistencyError("character inner product is not an integer; element set is not a closed group");
  }
  return static_cast<std::size_t>(num / g.order());
}

namespace detail {

inline std::size_t factorial_capped(std::size_t n, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (f > cap / i) return cap + 1;
    f *= i;
  }
  return f;
}

// A small generating set chosen greedily from the (sorted) element list.
inline std::vector<Permutation> extract_generators(std::size_t n, const std::vector<Permutation>& elements) {
  std::vector<Permutation> gens;
  std::unordered_set<Permutation, PermutationHash> span{Permutation::identity(n)};
  for (const auto& e : elements) {
    if (span.count(e)) continue;
    gens.push_back(e);
    std::vector<Permutation> frontier(span.begin(), span.end());
    for (std::size_t head = 0; head < frontier.size(); ++head) {
      for (const auto& s : gens) {
        Permutation next = compose(frontier[head], s);
        if (span.insert(next).second) frontier.push_back(std::move(next));
      }
    }
  }
  return gens;
}

// All Pi with A[Pi i, Pi j] = A[i, j] and w[Pi i] = w[i], by backtracking
// over nodes in index order with weight / degree-profile pruning.
inline std::vector<Permutation> automorphisms(const Eigen::MatrixXd& a, const std::vector<Rational>& w,
                                              std::size_t cap, std::size_t search_limit) {
  const auto n = static_cast<std::size_t>(a.rows());
  if (n > search_limit) {
    throw ValidationError("automorphism search: " + std::to_string(n) + " nodes exceeds search limit " +
                          std::to_string(search_limit) + "; supply generators instead");
  }
  // node profile: (weight, self loop, sorted incident weights)
  std::vector<std::vector<double>> profile(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) profile[i].push_back(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    std::sort(profile[i].begin(), profile[i].end());
  }
  auto compatible = [&](std::size_t v, std::size_t u) {
    return w[v] == w[u] && a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) ==
                               a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u)) &&
           profile[v] == profile[u];
  };

  std::vector<Permutation> out;
  std::vector<int> image(n, -1);
  std::vector<char> used(n, 0);

  auto extend = [&](auto&& self, std::size_t v) -> void {
    if (v == n) {
      out.emplace_back(image);
      if (out.size() > cap) throw CapacityError("automorphism group order exceeds element cap", cap);
      return;
    }
    for (std::size_t u = 0; u < n; ++u) {
      if (used[u] || !compatible(v, u)) continue;
      bool ok = true;
      for (std::size_t prev = 0; prev < v && ok; ++prev) {
        ok = a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(prev)) ==
             a(static_cast<Eigen::Index>(u), image[prev]);
      }
      if (!ok) continue;
      image[v] = static_cast<int>(u);
      used[u] = 1;
      self(self, v + 1);
      used[u] = 0;
      image[v] = -1;
    }
  };
  extend(extend, 0);
  std::sort(out.begin(), out.end());
  return out;
}

inline PermGroup group_from_elements(std::size_t n, const std::vector<Permutation>& elements, std::size_t cap,
                                     std::string label) {
  return close(n, extract_generators(n, elements), cap, std::move(label));
}

}  // namespace detail

inline PermGroup automorphism_group(const Graph& g, std::size_t cap = kDefaultElementCap,
                                    std::size_t search_limit = kDefaultSearchLimit) {
  auto elems = detail::automorphisms(g.adjacency(), g.node_weights(), cap, search_limit);
  return detail::group_from_elements(g.n(), elems, cap, "aut");
}

// Automorphisms of G' respect its node weights q_m / N.
inline PermGroup automorphism_group(const CoarseGraph& gc, std::size_t cap = kDefaultElementCap,
                                    std::size_t search_limit = kDefaultSearchLimit) {
  auto elems = detail::automorphisms(gc.adjacency(), gc.node_weights(), cap, search_limit);
  return detail::group_from_elements(gc.m(), elems, cap, "aut_coarse");
}

// Adjacent transpositions inside every cluster; they generate S_{c_1} x ... x S_{c_M}.
inline std::vector<Permutation> cluster_transpositions(const ClusterAssignment& assignment) {
  std::vector<Permutation> gens;
  for (std::size_t c = 0; c < assignment.m(); ++c) {
    const auto mem = assignment.members(c);
    for (std::size_t i = 0; i + 1 < mem.size(); ++i)
      gens.push_back(Permutation::transposition(assignment.n(), mem[i], mem[i + 1]));
  }
  return gens;
}

inline std::size_t cluster_product_order(const ClusterAssignment& assignment, std::size_t cap) {
  std::size_t order = 1;
  for (auto c : assignment.sizes()) {
    const std::size_t f = detail::factorial_capped(c, cap);
    if (f > cap || order > cap / f) return cap + 1;
    order *= f;
  }
  return order;
}

inline PermGroup cluster_product_group(const ClusterAssignment& assignment, std::size_t cap = kDefaultElementCap) {
  if (cluster_product_order(assignment, cap) > cap) {
    throw CapacityError("cluster product group order exceeds element cap", cap);
  }
  return close(assignment.n(), cluster_transpositions(assignment), cap, "cluster_products");
}

// Lifts a permutation h of cluster labels to [N]: node n in cluster m maps to
// the node at the same ascending-index position in cluster h(m).
inline Permutation blow_up_permutation(const ClusterAssignment& assignment, const Permutation& h) {
  if (h.degree() != assignment.m()) {
    throw ValidationError("coarse permutation degree " + std::to_string(h.degree()) + " differs from cluster count " +
                          std::to_string(assignment.m()));
  }
  std::vector<int> img(assignment.n());
  for (std::size_t c = 0; c < assignment.m(); ++c) {
    const auto src = assignment.members(c);
    const auto dst = assignment.members(static_cast<std::size_t>(h(c)));
    if (src.size() != dst.size()) {
      throw ValidationError("mismatched cluster sizes across a coarse orbit: cluster " + std::to_string(c + 1) +
                            " has " + std::to_string(src.size()) + " nodes, cluster " + std::to_string(h(c) + 1) +
                            " has " + std::to_string(dst.size()));
    }
    for (std::size_t j = 0; j < src.size(); ++j) img[static_cast<std::size_t>(src[j])] = dst[j];
  }
  return Permutation(std::move(img));
}

inline std::vector<Permutation> blow_up_generators(const ClusterAssignment& assignment, const PermGroup& coarse_aut) {
  std::vector<Permutation> out;
  for (const auto& h : coarse_aut.generators()) out.push_back(blow_up_permutation(assignment, h));
  return out;
}

// (S_{c_1} x ... x S_{c_M}) semidirect the blown-up coarse symmetry group.
inline PermGroup induced_symmetry_group(const ClusterAssignment& assignment, const PermGroup& coarse_aut,
                                        std::size_t cap = kDefaultElementCap) {
  if (coarse_aut.n() != assignment.m()) {
    throw ValidationError("coarse symmetry group acts on " + std::to_string(coarse_aut.n()) + " labels, assignment has " +
                          std::to_string(assignment.m()) + " clusters");
  }
  if (cluster_product_order(assignment, cap) > cap) {
    throw CapacityError("induced symmetry group order exceeds element cap", cap);
  }
  auto gens = cluster_transpositions(assignment);
  for (auto& g : blow_up_generators(assignment, coarse_aut)) gens.push_back(std::move(g));
  return close(assignment.n(), gens, cap, "induced");
}

inline PermGroup induced_symmetry_group(const Graph& g, const CoarseGraph& gc, const ClusterAssignment& assignment,
                                        std::size_t cap = kDefaultElementCap) {
  if (assignment.n() != g.n() || gc.fine_n() != g.n()) {
    throw ValidationError("induced symmetry group: graph, coarse graph and assignment disagree on N");
  }
  if (assignment.m() != gc.m()) throw ValidationError("induced symmetry group: assignment and coarse graph disagree on M");
  for (std::size_t c = 0; c < gc.m(); ++c) {
    if (assignment.sizes()[c] != gc.counts()[c]) {
      throw ValidationError("cluster " + std::to_string(c + 1) + " size " + std::to_string(assignment.sizes()[c]) +
                            " differs from coarse node weight count " + std::to_string(gc.counts()[c]));
    }
  }
  return induced_symmetry_group(assignment, automorphism_group(gc, cap), cap);
}

// Named group constructions with an element cap.
struct GroupSpec {
  struct Trivial {
    std::size_t n;
  };
  struct FullSymmetric {
    std::size_t n;
  };
  struct Automorphism {
    Graph graph;
  };
  struct ClusterProducts {
    ClusterAssignment assignment;
  };
  struct InducedCoarsening {
    Graph graph;
    CoarseGraph coarse;
    ClusterAssignment assignment;
  };
  struct Closure {
    std::size_t n;
    std::vector<Permutation> generators;
  };

  std::variant<Trivial, FullSymmetric, Automorphism, ClusterProducts, InducedCoarsening, Closure> recipe;
  std::size_t element_cap = kDefaultElementCap;
};

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <class... F>
Overloaded(F...) -> Overloaded<F...>;

inline PermGroup build_group(const GroupSpec& spec) {
  if (spec.element_cap < 1) throw ValidationError("element cap must be at least 1");
  const std::size_t cap = spec.element_cap;
  return std::visit(Overloaded{
                        [&](const GroupSpec::Trivial& r) { return trivial_group(r.n); },
                        [&](const GroupSpec::FullSymmetric& r) {
                          if (detail::factorial_capped(r.n, cap) > cap)
                            throw CapacityError("S" + std::to_string(r.n) + " exceeds element cap", cap);
                          return full_symmetric_group(r.n, cap);
                        },
                        [&](const GroupSpec::Automorphism& r) { return automorphism_group(r.graph, cap); },
                        [&](const GroupSpec::ClusterProducts& r) { return cluster_product_group(r.assignment, cap); },
                        [&](const GroupSpec::InducedCoarsening& r) {
                          return induced_symmetry_group(r.graph, r.coarse, r.assignment, cap);
                        },
                        [&](const GroupSpec::Closure& r) { return close(r.n, r.generators, cap); },
                    },
                    spec.recipe);
}

}  // namespace symsel
