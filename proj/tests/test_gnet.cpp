#include <gtest/gtest.h>

#include <map>

#include "gradcheck.hpp"
#include "symsel/gnet.hpp"
#include "test_support.hpp"

namespace symsel {
namespace {

using testing::finite_difference_check;
using testing::random_group;
using testing::random_matrix;
using testing::random_network;

constexpr Variant kAllVariants[] = {Variant::strict, Variant::gc, Variant::gc_ew, Variant::pt_ew, Variant::relax};

Network sn_linear(std::size_t n, bool bias) {
  return Network({make_layer(Variant::strict, pair_orbits(full_symmetric_group(n)), 1, 1, std::nullopt, bias)});
}

TEST(Variant, Names) {
  for (auto v : kAllVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("conv"), ValidationError);
}

TEST(Network, Validation) {
  const auto p = pair_orbits(full_symmetric_group(3));
  EXPECT_THROW(Network({make_layer(Variant::gc, p, 1, 1)}), ValidationError);
  EXPECT_THROW(Network({make_layer(Variant::strict, p, 1, 1, Graph::path(3))}), ValidationError);
  EXPECT_THROW(Network({make_layer(Variant::gc, p, 1, 1, Graph::path(4))}), ValidationError);
  EXPECT_THROW(Network({make_layer(Variant::strict, p, 1, 2), make_layer(Variant::strict, p, 3, 1)}), ValidationError);
  EXPECT_THROW(Network({make_layer(Variant::strict, p, 1, 1), make_layer(Variant::strict, relax_pattern(4), 1, 1)}),
               ValidationError);
  EXPECT_THROW(Network(std::vector<LayerSpec>{}), ValidationError);
  const Network net = sn_linear(3, false);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(4, 1)), ValidationError);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(3, 2)), ValidationError);
}

TEST(Network, ParameterCounts) {
  EXPECT_EQ(sn_linear(5, false).parameter_count(), 2u);
  EXPECT_EQ(sn_linear(5, true).parameter_count(), 3u);
  Philox4x32 rng(1, 0);
  for (int t = 0; t < 10; ++t) {
    const auto g = random_group(5, rng);
    const Network net({make_layer(Variant::strict, pair_orbits(g), 2, 3)});
    EXPECT_EQ(net.parameter_count(), char_inner_product(g, 2, 3) + 3);
  }
}

TEST(Forward, IdentityWeights) {
  Network net = sn_linear(4, false);
  const auto p = pair_orbits(full_symmetric_group(4));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
  w(p.at(0, 0)) = 1.0;
  net.set_params(w);
  Philox4x32 rng(2, 0);
  const Eigen::MatrixXd x = random_matrix(4, 1, rng);
  EXPECT_EQ(net.forward(x), x);
}

TEST(Forward, StrictNetsAreEquivariant) {
  Philox4x32 rng(3, 0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + rng() % 4;
    const auto g = random_group(n, rng);
    const auto p = pair_orbits(g);
    Network net({make_layer(Variant::strict, p, 2, 4), make_layer(Variant::strict, p, 4, 3)});
    net.initialize(rng());
    Eigen::VectorXd params = net.params();
    params.tail(3) = random_matrix(3, 1, rng);
    net.set_params(params);
    const Eigen::MatrixXd x = random_matrix(static_cast<Eigen::Index>(n), 2, rng);
    const Eigen::MatrixXd y = net.forward(x);
    for (const auto& gen : g.generators()) {
      const Eigen::MatrixXd pg = permutation_matrix(gen);
      EXPECT_LT((net.forward(pg * x) - pg * y).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Forward, GraphConvolutionBreaksSymmetry) {
  Philox4x32 rng(4, 0);
  const std::size_t n = 5;
  const auto sn = full_symmetric_group(n);
  Network net({make_layer(Variant::gc, pair_orbits(sn), 1, 1, Graph::path(n))});
  net.initialize(7);
  const Eigen::MatrixXd x = random_matrix(static_cast<Eigen::Index>(n), 1, rng);
  double worst = 0.0;
  for (const auto& gen : sn.generators()) {
    const Eigen::MatrixXd pg = permutation_matrix(gen);
    worst = std::max(worst, (net.forward(pg * x) - pg * net.forward(x)).cwiseAbs().maxCoeff());
  }
  EXPECT_GT(worst, 1e-6);
}

TEST(Forward, TrivialNetContainsGroupNets) {
  Philox4x32 rng(5, 0);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 4;
    const auto g = random_group(n, rng);
    Network gnet({make_layer(Variant::strict, pair_orbits(g), 2, 2, std::nullopt, false)});
    gnet.initialize(rng());
    const Eigen::MatrixXd op = gnet.layer_operator(0);
    Network triv({make_layer(Variant::strict, pair_orbits(trivial_group(n)), 2, 2, std::nullopt, false)});
    Eigen::VectorXd p(triv.parameter_count());
    // trivial pattern: orbit of (i, j) is i n + j
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 2; ++b)
            p(static_cast<Eigen::Index>((i * n + j) * 4 + a * 2 + b)) =
                op(static_cast<Eigen::Index>(i * 2 + a), static_cast<Eigen::Index>(j * 2 + b));
    triv.set_params(p);
    EXPECT_EQ(triv.layer_operator(0), op);
  }
}

TEST(Loss, Examples) {
  Philox4x32 rng(6, 0);
  const Eigen::MatrixXd a = random_matrix(4, 3, rng);
  EXPECT_EQ(loss_mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(loss_mse(a + Eigen::MatrixXd::Ones(4, 3), a), 1.0);
  const Eigen::MatrixXd b = random_matrix(4, 3, rng);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) acc += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  EXPECT_NEAR(loss_mse(a, b), acc / 12.0, 1e-15);
  EXPECT_THROW(loss_mse(a, b.transpose()), ValidationError);
}

TEST(Gradient, ZeroResidualGivesZero) {
  Philox4x32 rng(7, 0);
  for (auto v : kAllVariants) {
    const Network net = random_network(v, 4, 1, 3, 1, rng);
    const Eigen::MatrixXd x = random_matrix(4, 5, rng);
    EXPECT_TRUE(gradient(net, x, net.forward_batch(x)).isZero(0.0)) << variant_name(v);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  Philox4x32 rng(8, 0);
  for (auto v : kAllVariants) {
    for (int t = 0; t < 4; ++t) {
      const std::size_t n = 3 + rng() % 4;
      const Network net = random_network(v, n, 2, 3, 2, rng);
      const Eigen::MatrixXd x = random_matrix(static_cast<Eigen::Index>(n * 2), 4, rng);
      const Eigen::MatrixXd y = random_matrix(static_cast<Eigen::Index>(n * 2), 4, rng);
      const auto check = finite_difference_check(net, x, y);
      EXPECT_LT(check.max_rel_error, 1e-4) << variant_name(v);
    }
  }
}

// Tied gradient = sum over the orbit of the gradients of an untied twin.
TEST(Gradient, TiedEqualsSumOfUntied) {
  Philox4x32 rng(9, 0);
  const std::size_t n = 5;
  const auto g = random_group(n, rng);
  const auto p = pair_orbits(g);
  Network tied({make_layer(Variant::strict, p, 1, 1, std::nullopt, false)});
  tied.initialize(3);
  Network untied({make_layer(Variant::strict, pair_orbits(trivial_group(n)), 1, 1, std::nullopt, false)});
  Eigen::VectorXd up(static_cast<Eigen::Index>(n * n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) up(static_cast<Eigen::Index>(i * n + j)) = tied.params()(p.at(i, j));
  untied.set_params(up);
  const Eigen::MatrixXd x = random_matrix(static_cast<Eigen::Index>(n), 6, rng);
  const Eigen::MatrixXd y = random_matrix(static_cast<Eigen::Index>(n), 6, rng);
  const Eigen::VectorXd gt = gradient(tied, x, y);
  const Eigen::VectorXd gu = gradient(untied, x, y);
  Eigen::VectorXd summed = Eigen::VectorXd::Zero(gt.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) summed(p.at(i, j)) += gu(static_cast<Eigen::Index>(i * n + j));
  EXPECT_LT((gt - summed).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tape, ReplayIsBitIdenticalAndStaleIsRejected) {
  Philox4x32 rng(10, 0);
  for (auto v : kAllVariants) {
    Network net = random_network(v, 4, 1, 3, 1, rng);
    const Eigen::MatrixXd x = random_matrix(4, 3, rng);
    const Eigen::MatrixXd y = random_matrix(4, 3, rng);
    const auto rec = record(net, x, y);
    const auto replayed = rec.tape.replay(net.params());
    EXPECT_EQ(replayed[rec.output], rec.tape.value(rec.output));
    EXPECT_EQ(replayed[rec.loss](0, 0), rec.tape.value(rec.loss)(0, 0));
    Eigen::VectorXd p = net.params();
    p(0) += 1e-3;
    net.set_params(p);
    EXPECT_THROW(gradient(net, rec), StaleTapeError);
  }
}

TEST(Train, LinearNetRecoversEquivariantTarget) {
  Philox4x32 rng(11, 0);
  const std::size_t n = 4;
  const auto g = automorphism_group(Graph::path(n));
  const auto p = pair_orbits(g);
  Network teacher({make_layer(Variant::strict, p, 1, 1, std::nullopt, false)});
  teacher.initialize(5);
  const Eigen::MatrixXd x = random_matrix(static_cast<Eigen::Index>(n), 40, rng);
  const Eigen::MatrixXd y = teacher.forward_batch(x);
  Network student({make_layer(Variant::strict, p, 1, 1, std::nullopt, false)});
  student.initialize(6);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.optimizer = Optimizer::adam;
  cfg.lr = 0.01;
  const auto res = train(student, x, y, cfg);
  EXPECT_LT(res.loss_trace.back(), 1e-6);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
  // closed-form least squares over the orbit features gives the same map
  Eigen::MatrixXd features(x.size(), static_cast<Eigen::Index>(p.orbit_count));
  features.setZero();
  for (Eigen::Index s = 0; s < x.cols(); ++s)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        features(s * static_cast<Eigen::Index>(n) + static_cast<Eigen::Index>(i), p.at(i, j)) +=
            x(static_cast<Eigen::Index>(j), s);
  Eigen::VectorXd target_sample_major(y.size());
  for (Eigen::Index s = 0; s < y.cols(); ++s) target_sample_major.segment(s * y.rows(), y.rows()) = y.col(s);
  const Eigen::VectorXd ls = features.colPivHouseholderQr().solve(target_sample_major);
  EXPECT_LT((student.params() - ls).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((ls - teacher.params()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Train, ZeroLearningRateAndDeterminism) {
  Philox4x32 rng(12, 0);
  Network net = random_network(Variant::gc_ew, 4, 1, 3, 1, rng);
  const Eigen::MatrixXd x = random_matrix(4, 10, rng);
  const Eigen::MatrixXd y = random_matrix(4, 10, rng);
  Network frozen = net;
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 5;
  cfg.batch = 3;
  train(frozen, x, y, cfg);
  EXPECT_EQ(frozen.params(), net.params());

  cfg.lr = 0.01;
  cfg.seed = 4;
  Network a = net, b = net;
  const auto ra = train(a, x, y, cfg);
  const auto rb = train(b, x, y, cfg);
  EXPECT_EQ(ra.loss_trace, rb.loss_trace);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(ra.steps, 5u * 4u);

  cfg.optimizer = Optimizer::sgd;
  Network c = net;
  const auto rc = train(c, x, y, cfg);
  EXPECT_LT(rc.loss_trace.back(), rc.loss_trace.front());
}

TEST(Train, DivergenceReportsStep) {
  Network net = sn_linear(3, true);
  net.initialize(1);
  Philox4x32 rng(13, 0);
  const Eigen::MatrixXd x = 100.0 * random_matrix(3, 8, rng);
  const Eigen::MatrixXd y = random_matrix(3, 8, rng);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::sgd;
  cfg.lr = 10.0;
  cfg.epochs = 1000;
  try {
    train(net, x, y, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 0u);
  }
}

TEST(BlockFormSharing, MatchesInducedGroupOrbits) {
  const auto swap = close(2, {Permutation::transposition(2, 0, 1)});
  const ClusterAssignment a({0, 0, 1, 1, 0, 1});
  const auto sharing = block_form_sharing(block_form(a, swap));
  const auto orbits = pair_orbits(induced_symmetry_group(a, swap));
  EXPECT_EQ(sharing.orbit_count, orbits.orbit_count);
  // same partition: the id maps are mutually consistent
  std::map<int, int> fwd;
  for (std::size_t e = 0; e < sharing.orbit_of.size(); ++e) {
    auto [it, fresh] = fwd.try_emplace(sharing.orbit_of[e], orbits.orbit_of[e]);
    EXPECT_EQ(it->second, orbits.orbit_of[e]);
  }
  // singletons: no within-cluster off-diagonal class
  EXPECT_EQ(block_form_sharing(block_form(ClusterAssignment::identity(3))).orbit_count, 9u);
}

}  // namespace
}  // namespace symsel
