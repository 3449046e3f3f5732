#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "symsel/perm.hpp"
#include "symsel/rng.hpp"

namespace symsel {
namespace {

Permutation perm(std::vector<int> im) { return Permutation(std::move(im)); }

std::vector<Permutation> all_permutations(std::size_t n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do out.emplace_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::counter_type;
  EXPECT_EQ(Philox4x32::bijection(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::bijection(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::bijection(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  Philox4x32 a(7, 3), b(7, 3), c(7, 4);
  bool differs = false;
  for (int i = 0; i < 16; ++i) {
    const auto x = a(), y = b(), z = c();
    EXPECT_EQ(x, y);
    differs |= (x != z);
  }
  EXPECT_TRUE(differs);
}

TEST(Permutation, RejectsNonBijection) {
  EXPECT_THROW(perm({0, 0, 1}), ValidationError);
  EXPECT_THROW(perm({0, 3, 1}), ValidationError);
}

TEST(Compose, IdentityAndInvolution) {
  const auto p = perm({2, 0, 1});
  EXPECT_EQ(compose(Permutation::identity(3), p), p);
  const auto t = Permutation::transposition(3, 0, 1);
  EXPECT_TRUE(compose(t, t).is_identity());
}

TEST(Compose, MatchesPermutationMatrixProduct) {
  // (1 2) o (2 3) = (1 2 3)
  const auto p = Permutation::transposition(3, 0, 1);
  const auto q = Permutation::transposition(3, 1, 2);
  const auto r = compose(p, q);
  EXPECT_EQ(r.images(), (std::vector<int>{1, 2, 0}));
  EXPECT_EQ(r.cycle_string(), "(1 2 3)");
  EXPECT_TRUE(permutation_matrix(r).isApprox(permutation_matrix(p) * permutation_matrix(q)));
}

TEST(Compose, DegreeMismatchThrows) {
  EXPECT_THROW(compose(Permutation::identity(2), Permutation::identity(3)), ValidationError);
}

TEST(Close, SmallGroups) {
  EXPECT_EQ(close(3, {}).order(), 1u);
  EXPECT_EQ(close(3, {Permutation::transposition(3, 0, 1)}).order(), 2u);
  const auto s3 = close(3, {Permutation::transposition(3, 0, 1), Permutation::cycle(3, {0, 1, 2})});
  EXPECT_EQ(s3.order(), 6u);
  // exhaustive oracle: every permutation of 3 points is present
  for (const auto& p : all_permutations(3)) EXPECT_TRUE(s3.contains(p));
  EXPECT_TRUE(s3.elements().front().is_identity());
}

TEST(Close, CapacityErrorNamesCap) {
  try {
    full_symmetric_group(5, 100);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.cap(), 100u);
    EXPECT_NE(std::string(e.what()).find("100"), std::string::npos);
  }
}

TEST(Close, ClosedUnderCompositionAndInverse) {
  Philox4x32 rng(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng() % 4;
    std::vector<Permutation> gens;
    for (int g = 0; g < 2; ++g) {
      std::vector<int> im(n);
      std::iota(im.begin(), im.end(), 0);
      std::shuffle(im.begin(), im.end(), rng);
      gens.emplace_back(im);
    }
    const auto grp = close(n, gens);
    // Lagrange
    std::size_t fact = 1;
    for (std::size_t i = 2; i <= n; ++i) fact *= i;
    EXPECT_EQ(fact % grp.order(), 0u);
    for (const auto& a : grp.elements()) {
      EXPECT_TRUE(grp.contains(a.inverse()));
      for (const auto& b : grp.elements()) ASSERT_TRUE(grp.contains(compose(a, b)));
    }
    for (const auto& g : grp.generators()) EXPECT_TRUE(grp.contains(g));
  }
}

TEST(FixedPoints, Basic) {
  EXPECT_EQ(fixed_points(Permutation::identity(5)), 5u);
  EXPECT_EQ(fixed_points(Permutation::transposition(3, 0, 1)), 1u);
  EXPECT_EQ(fixed_points(Permutation::cycle(3, {0, 1, 2})), 0u);
}

TEST(CharInnerProduct, WorkedExampleValues) {
  EXPECT_EQ(char_inner_product(full_symmetric_group(3), 1, 1), 2u);
  EXPECT_EQ(char_inner_product(close(3, {Permutation::transposition(3, 0, 1)}), 1, 1), 5u);
  EXPECT_EQ(char_inner_product(trivial_group(4), 1, 1), 16u);
  EXPECT_EQ(char_inner_product(full_symmetric_group(3), 2, 3), 12u);
}

TEST(Automorphism, PathP4) {
  const auto g = automorphism_group(Graph::path(4));
  ASSERT_EQ(g.order(), 2u);
  ASSERT_EQ(g.generators().size(), 1u);
  EXPECT_EQ(g.generators()[0].cycle_string(), "(1 4)(2 3)");
}

TEST(Automorphism, CompleteAndCycle) {
  EXPECT_EQ(automorphism_group(Graph::complete(3)).order(), 6u);
  EXPECT_EQ(automorphism_group(Graph::cycle(4)).order(), 8u);
}

TEST(Automorphism, NodeWeightsRestrictSymmetry) {
  Graph g(Graph::path(4).adjacency(), {Rational(1), Rational(1), Rational(1), Rational(2)});
  EXPECT_EQ(automorphism_group(g).order(), 1u);
}

TEST(Automorphism, SearchLimitAndCap) {
  EXPECT_THROW(automorphism_group(Graph::path(13)), ValidationError);
  EXPECT_THROW(automorphism_group(Graph::complete(8), 1000), CapacityError);
}

// Exhaustive oracle: filter all n! permutations by Pi A Pi^T = A and Pi b = b.
TEST(Automorphism, MatchesExhaustiveFilter) {
  Philox4x32 rng(5, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double levels[] = {0.0, 0.5, 1.0};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double v = (i == j && trial % 2) ? 0.0 : levels[rng() % 3];
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    std::vector<Rational> w(n, Rational(1));
    if (trial % 3 == 0) w[rng() % n] = Rational(1, 2);
    const Graph g(a, w);
    std::set<std::vector<int>> oracle;
    for (const auto& p : all_permutations(n)) {
      const Eigen::MatrixXd pm = permutation_matrix(p);
      bool ok = (pm * a * pm.transpose() - a).cwiseAbs().maxCoeff() == 0.0;
      for (std::size_t i = 0; i < n && ok; ++i) ok = w[static_cast<std::size_t>(p(i))] == w[i];
      if (ok) oracle.insert(p.images());
    }
    const auto grp = automorphism_group(g);
    std::set<std::vector<int>> got;
    for (const auto& e : grp.elements()) got.insert(e.images());
    EXPECT_EQ(got, oracle) << "trial " << trial;
  }
}

TEST(ClusterProducts, Orders) {
  EXPECT_EQ(cluster_product_group(ClusterAssignment::identity(4)).order(), 1u);
  EXPECT_EQ(cluster_product_group(ClusterAssignment::single(5)).order(), 120u);
  EXPECT_EQ(cluster_product_group(ClusterAssignment({0, 0, 1, 1})).order(), 4u);
  EXPECT_THROW(cluster_product_group(ClusterAssignment::single(9)), CapacityError);
}

TEST(InducedGroup, Examples) {
  // singletons with an asymmetric coarse graph: no freedom
  const auto ident = ClusterAssignment::identity(3);
  const auto asym = automorphism_group(Graph(Graph::path(3).adjacency(), {Rational(1), Rational(2), Rational(3)}));
  EXPECT_EQ(induced_symmetry_group(ident, asym).order(), 1u);

  // one cluster, coarse graph a single node: S_N
  EXPECT_EQ(induced_symmetry_group(ClusterAssignment::single(4), trivial_group(1)).order(), 24u);

  // clusters (2,2) with the coarse swap: 2! 2! 2 = 8
  const ClusterAssignment a22({0, 1, 0, 1});
  const auto swap = close(2, {Permutation::transposition(2, 0, 1)});
  const auto g = induced_symmetry_group(a22, swap);
  EXPECT_EQ(g.order(), 8u);
  // blown-up swap pairs members positionally: 1<->2, 3<->4 (1-indexed)
  EXPECT_EQ(blow_up_permutation(a22, swap.generators()[0]).cycle_string(), "(1 2)(3 4)");
}

TEST(InducedGroup, FromGraphAndCoarseGraph) {
  // C4 with opposite-pair clusters; coarse graph [[0,1],[1,0]] with q = (2,2)
  const Graph c4 = Graph::cycle(4);
  const ClusterAssignment a({0, 1, 0, 1});
  Eigen::MatrixXd ca(2, 2);
  ca << 0, 1, 1, 0;
  const CoarseGraph gc(ca, {2, 2});
  EXPECT_EQ(induced_symmetry_group(c4, gc, a).order(), 8u);
  const CoarseGraph bad(ca, {1, 3});
  EXPECT_THROW(induced_symmetry_group(c4, bad, a), ValidationError);
}

TEST(InducedGroup, MismatchedOrbitSizes) {
  const ClusterAssignment a({0, 0, 1});
  const auto swap = close(2, {Permutation::transposition(2, 0, 1)});
  EXPECT_THROW(induced_symmetry_group(a, swap), ValidationError);
}

TEST(GroupSpec, BuildsEachRecipe) {
  EXPECT_EQ(build_group({GroupSpec::Trivial{3}}).order(), 1u);
  EXPECT_EQ(build_group({GroupSpec::FullSymmetric{4}}).order(), 24u);
  EXPECT_EQ(build_group({GroupSpec::Automorphism{Graph::cycle(5)}}).order(), 10u);
  EXPECT_EQ(build_group({GroupSpec::ClusterProducts{ClusterAssignment({0, 0, 0, 1})}}).order(), 6u);
  EXPECT_EQ(build_group({GroupSpec::Closure{4, {Permutation::cycle(4, {0, 1, 2, 3})}}}).order(), 4u);
  EXPECT_THROW(build_group({GroupSpec::FullSymmetric{8}}), CapacityError);
  GroupSpec capped{GroupSpec::FullSymmetric{4}, 0};
  EXPECT_THROW(build_group(capped), ValidationError);
}

}  // namespace
}  // namespace symsel
