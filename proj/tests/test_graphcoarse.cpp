#include <gtest/gtest.h>

#include "symsel/graphcoarse.hpp"
#include "test_support.hpp"

namespace symsel {
namespace {

using testing::naive_cut_norm;

Eigen::MatrixXd uniform_matrix(Eigen::Index k, double lo, double hi, Philox4x32& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = u(rng);
  return m;
}

TEST(Graphon, InducedValues) {
  EXPECT_TRUE(induce_graphon(Graph(Eigen::MatrixXd::Zero(3, 3))).values.isZero());
  const auto w = induce_graphon(Graph::complete(2));
  Eigen::MatrixXd k2(2, 2);
  k2 << 0, 1, 1, 0;
  EXPECT_EQ(w.values, k2);
  EXPECT_EQ(w(0.1, 0.9), 1.0);
  EXPECT_EQ(w(0.2, 0.3), 0.0);
  EXPECT_EQ(w(1.0, 0.0), 1.0);
}

TEST(BlowUp, Examples) {
  const CoarseGraph single(Eigen::MatrixXd::Constant(1, 1, 0.3), {4});
  EXPECT_EQ(blow_up(single).adjacency(), Eigen::MatrixXd::Constant(4, 4, 0.3));

  Eigen::MatrixXd a(2, 2);
  a << 0.2, 0.7, 0.7, 0.0;
  EXPECT_EQ(blow_up(CoarseGraph(a, {1, 1})).adjacency(), a);

  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  Eigen::MatrixXd expected(4, 4);
  expected << 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0;
  EXPECT_EQ(blow_up(CoarseGraph(swap, {2, 2})).adjacency(), expected);
}

TEST(BlowUp, SizeMismatchThrows) {
  const CoarseGraph gc(Eigen::MatrixXd::Zero(2, 2), {2, 2});
  EXPECT_THROW(blow_up(gc, ClusterAssignment({0, 1, 1})), ValidationError);
}

TEST(Coarsen, Examples) {
  Philox4x32 rng(5, 0);
  const auto p5 = Graph::path(5);
  const auto ident = coarsen(p5, ClusterAssignment::identity(5));
  EXPECT_EQ(ident.adjacency(), p5.adjacency());
  EXPECT_EQ(blow_up(ident).adjacency(), p5.adjacency());

  const auto c4 = Graph::cycle(4);
  const ClusterAssignment opposite({0, 1, 0, 1});
  const auto gc = coarsen(c4, opposite);
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  EXPECT_EQ(gc.adjacency(), swap);
  EXPECT_EQ(gc.node_weights()[0], Rational(1, 2));
  const auto err = coarsening_error(c4, gc, opposite);
  EXPECT_EQ(err.value, 0.0);
  EXPECT_TRUE(err.exact);

  const auto one = coarsen(c4, ClusterAssignment::single(4));
  EXPECT_DOUBLE_EQ(one.adjacency()(0, 0), 8.0 / 16.0);

  EXPECT_THROW(coarsen(c4, ClusterAssignment({0, 0, 2, 2}, 3)), ValidationError);
  EXPECT_THROW(coarsen(c4, ClusterAssignment({0, 0, 1})), ValidationError);
}

TEST(Coarsen, PathTwoClusters) {
  const auto p4 = Graph::path(4);
  const ClusterAssignment a({0, 0, 1, 1});
  const auto gc = coarsen(p4, a);
  Eigen::MatrixXd expected(2, 2);
  expected << 0.5, 0.25, 0.25, 0.5;
  EXPECT_EQ(gc.adjacency(), expected);
  const Eigen::MatrixXd residual = p4.adjacency() - blow_up(gc).adjacency();
  const auto err = coarsening_error(p4, gc, a);
  EXPECT_TRUE(err.exact);
  EXPECT_DOUBLE_EQ(err.value, naive_cut_norm(residual));
  EXPECT_GT(err.value, 0.0);
}

TEST(CutNorm, Examples) {
  EXPECT_EQ(cut_norm_exact(Eigen::MatrixXd::Zero(3, 3)), 0.0);
  Eigen::MatrixXd k2(2, 2);
  k2 << 0, 1, 1, 0;
  EXPECT_DOUBLE_EQ(cut_norm_exact(k2), 0.5);
  Eigen::MatrixXd alt(2, 2);
  alt << 1, -1, -1, 1;
  EXPECT_DOUBLE_EQ(cut_norm_exact(alt), 0.25);
  EXPECT_DOUBLE_EQ(naive_cut_norm(k2), 0.5);
  EXPECT_DOUBLE_EQ(naive_cut_norm(alt), 0.25);
}

TEST(CutNorm, LimitsAndModes) {
  Philox4x32 rng(6, 0);
  const Eigen::MatrixXd big = uniform_matrix(16, -1, 1, rng);
  EXPECT_THROW(cut_norm_exact(big), ValidationError);
  const auto r = cut_norm(big);
  EXPECT_FALSE(r.exact);
  EXPECT_GT(r.value, 0.0);
  EXPECT_THROW(cut_norm_exact(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
  EXPECT_TRUE(cut_norm(uniform_matrix(5, -1, 1, rng)).exact);
}

TEST(CutNorm, MatchesNaiveOracle) {
  Philox4x32 rng(7, 0);
  for (int t = 0; t < 30; ++t) {
    const auto k = static_cast<Eigen::Index>(1 + rng() % 7);
    const Eigen::MatrixXd w = uniform_matrix(k, -1, 1, rng);
    const double exact = cut_norm_exact(w);
    EXPECT_NEAR(exact, naive_cut_norm(w), 1e-12);
    EXPECT_LE(cut_norm_heuristic(w, kCutNormRestarts, static_cast<std::uint64_t>(t)), exact + 1e-12);
  }
}

TEST(CutNorm, Bounds) {
  Philox4x32 rng(8, 0);
  for (int t = 0; t < 20; ++t) {
    const auto k = static_cast<Eigen::Index>(2 + rng() % 8);
    const Eigen::MatrixXd w = uniform_matrix(k, -1, 1, rng);
    const double c = cut_norm_exact(w);
    EXPECT_LE(c, w.cwiseAbs().mean() + 1e-12);
    EXPECT_GE(c, std::abs(w.mean()) - 1e-12);
    const Eigen::MatrixXd nonneg = uniform_matrix(k, 0, 1, rng);
    EXPECT_NEAR(cut_norm_exact(nonneg), nonneg.mean(), 1e-12);
  }
}

TEST(CoarseningError, InvariantUnderWithinClusterRelabeling) {
  Philox4x32 rng(9, 0);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 6;
    Eigen::MatrixXd a = uniform_matrix(static_cast<Eigen::Index>(n), 0, 1, rng);
    a = (0.5 * (a + a.transpose())).eval();
    const Graph g(a);
    const ClusterAssignment assign({0, 1, 0, 2, 1, 0});
    const double base = coarsening_error(g, coarsen(g, assign), assign).value;
    // swap nodes 0 and 2 (both in cluster 0)
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(6, 6);
    p.row(0).swap(p.row(2));
    const Graph relabeled(Eigen::MatrixXd(p * a * p.transpose()));
    EXPECT_NEAR(coarsening_error(relabeled, coarsen(relabeled, assign), assign).value, base, 1e-12);
    EXPECT_EQ(coarsening_error(g, coarsen(g, ClusterAssignment::identity(n)), ClusterAssignment::identity(n)).value,
              0.0);
  }
}

TEST(CutDistance, Examples) {
  const auto p4 = Graph::path(4);
  EXPECT_EQ(cut_distance_exhaustive(p4, p4), 0.0);
  const auto relabeled = Graph::from_edges(4, {{2, 0}, {0, 3}, {3, 1}});
  EXPECT_EQ(cut_distance_exhaustive(p4, relabeled), 0.0);
  const auto k2_plus = Graph::from_edges(4, {{0, 1}});
  EXPECT_GT(cut_distance_exhaustive(p4, k2_plus), 0.0);
  EXPECT_THROW(cut_distance_exhaustive(p4, Graph::path(3)), ValidationError);
  EXPECT_THROW(cut_distance_exhaustive(Graph::path(9), Graph::path(9)), ValidationError);
}

}  // namespace
}  // namespace symsel
