#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "symsel/equivmap.hpp"
#include "symsel/error.hpp"
#include "symsel/parallel.hpp"
#include "symsel/perm.hpp"
#include "symsel/rng.hpp"
#include "symsel/stats.hpp"

namespace symsel {

struct RegressionSpec {
  std::size_t n_nodes = 0;
  std::size_t d = 1;
  std::size_t k = 1;
  std::size_t n = 0;
  double sigma_x2 = 1.0;
  double sigma_xi2 = 1.0;
  std::uint64_t seed = 0;

  std::size_t nd() const { return n_nodes * d; }
  std::size_t nk() const { return n_nodes * k; }

  void validate() const {
    if (n_nodes == 0 || d == 0 || k == 0) throw ValidationError("regression: N, d and k must be positive");
    if (!(sigma_x2 > 0.0)) throw ValidationError("regression: sigma_x^2 must be positive");
    if (!(sigma_xi2 >= 0.0)) throw ValidationError("regression: sigma_xi^2 must be nonnegative");
  }

  // Closed forms need n > Nd + 1.
  void require_determined() const {
    if (n <= nd() + 1) {
      throw DomainError("n = " + std::to_string(n) + " must exceed Nd + 1 = " + std::to_string(nd() + 1));
    }
  }
};

inline constexpr double kEquivarianceTolerance = 1e-10;

struct TargetModel {
  Eigen::MatrixXd theta;
  std::optional<PermGroup> declared_group;

  TargetModel() = default;

  TargetModel(Eigen::MatrixXd t, std::optional<PermGroup> group, std::size_t d, std::size_t k)
      : theta(std::move(t)), declared_group(std::move(group)) {
    if (declared_group) {
      const double defect = anti_part(theta, *declared_group, d, k).norm();
      if (defect >= kEquivarianceTolerance) {
        throw ValidationError("target: theta is not equivariant to the declared group '" + declared_group->label() +
                              "' (anti-part norm " + std::to_string(defect) + ")");
      }
    }
  }

  explicit TargetModel(Eigen::MatrixXd t) : theta(std::move(t)) {}
};

struct RiskReport {
  std::string group_label;
  std::size_t n = 0;
  std::size_t trials = 0;
  double theory_gap = std::numeric_limits<double>::quiet_NaN();
  double bias_term = std::numeric_limits<double>::quiet_NaN();
  double variance_term = std::numeric_limits<double>::quiet_NaN();
  double mc_gap = std::numeric_limits<double>::quiet_NaN();
  double mc_stderr = std::numeric_limits<double>::quiet_NaN();
};

struct Dataset {
  Eigen::MatrixXd x;  // n x Nd
  Eigen::MatrixXd y;  // n x Nk
};

namespace detail {

inline void check_target(const TargetModel& target, const RegressionSpec& spec) {
  spec.validate();
  check_theta_shape(target.theta, spec.n_nodes, spec.d, spec.k);
}

inline void fill_normal(Eigen::MatrixXd& m, double variance, Philox4x32& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = nd(rng);
}

}  // namespace detail

// Rows X_i ~ N(0, sigma_x^2 I), Y_i = Theta^T X_i + xi_i. `stream` selects an
// independent substream of spec.seed.
inline Dataset sample_dataset(const RegressionSpec& spec, const TargetModel& target, std::uint64_t stream = 0) {
  detail::check_target(target, spec);
  Philox4x32 rng(spec.seed, stream);
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.nd()));
  detail::fill_normal(out.x, spec.sigma_x2, rng);
  Eigen::MatrixXd noise(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.nk()));
  if (spec.sigma_xi2 > 0.0) {
    detail::fill_normal(noise, spec.sigma_xi2, rng);
  } else {
    noise.setZero();
  }
  out.y = out.x * target.theta + noise;
  return out;
}

inline constexpr double kPinvCutoff = 1e-10;

struct LeastSquaresFit {
  Eigen::MatrixXd theta;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

// Minimum-norm solution of min ||Y - X Theta||_F. Singular values of X below
// kPinvCutoff * sigma_max are dropped.
inline LeastSquaresFit least_squares(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw ValidationError("least squares: X and Y have different row counts");
  LeastSquaresFit fit;
  if (x.size() == 0) {
    fit.theta = Eigen::MatrixXd::Zero(x.cols(), y.cols());
    fit.rank_deficient = x.cols() > 0;
    return fit;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kPinvCutoff);
  fit.theta = svd.solve(y);
  fit.rank = svd.rank();
  fit.rank_deficient = fit.rank < x.cols();
  return fit;
}

inline Eigen::MatrixXd projected_estimator(const Eigen::MatrixXd& theta_hat, const PermGroup& g, std::size_t d,
                                           std::size_t k) {
  return intertwiner_project(theta_hat, g, d, k);
}

// Per output coordinate: sigma_xi^2 Nd / (n - Nd - 1) + sigma_xi^2.
inline double theory_ls_risk(const RegressionSpec& spec) {
  spec.validate();
  spec.require_determined();
  const double nd = static_cast<double>(spec.nd());
  return spec.sigma_xi2 * nd / (static_cast<double>(spec.n) - nd - 1.0) + spec.sigma_xi2;
}

inline RiskReport theory_risk_gap(const TargetModel& target, const PermGroup& g, const RegressionSpec& spec) {
  detail::check_target(target, spec);
  if (g.n() != spec.n_nodes) throw ValidationError("risk gap: group degree differs from N");
  spec.require_determined();
  RiskReport r;
  r.group_label = g.label();
  r.n = spec.n;
  r.bias_term = -spec.sigma_x2 * anti_part(target.theta, g, spec.d, spec.k).squaredNorm();
  const double nn = static_cast<double>(spec.n_nodes);
  const double full = nn * nn * static_cast<double>(spec.d * spec.k);
  const double chi = static_cast<double>(char_inner_product(g, spec.d, spec.k));
  r.variance_term = spec.sigma_xi2 * (full - chi) / (static_cast<double>(spec.n) - static_cast<double>(spec.nd()) - 1.0);
  r.theory_gap = r.bias_term + r.variance_term;
  return r;
}

// Closed-form bias for Theta = [[a,b,c],[b,a,c],[d,d,e]] projected onto S_3.
inline double theory_bias_s3_example(double a, double b, double c, double d, double e, double sigma_x2) {
  const double t1 = 2.0 * (a - e) * (a - e) / 3.0;
  const double t2 = 2.0 * (-2.0 * b + c + d) * (-2.0 * b + c + d) / 9.0;
  const double t3 = 2.0 * (b - 2.0 * c + d) * (b - 2.0 * c + d) / 9.0;
  const double t4 = 2.0 * (b + c - 2.0 * d) * (b + c - 2.0 * d) / 9.0;
  return -sigma_x2 * (t1 + t2 + t3 + t4);
}

// Outcome of a Monte Carlo sweep point: plain LS risk (per output coordinate)
// and the risk gap for every requested group, all from the same trials.
struct McResult {
  std::size_t trials = 0;
  MeanStderr ls_risk;
  std::vector<MeanStderr> gaps;
};

// Trial t draws its training set from substream (n, t), so every group at the
// same n sees identical data. Test risk uses the conditional closed form
// sigma_x^2 ||Theta - Theta_hat||_F^2 + sigma_xi^2 Nk.
inline McResult mc_sweep_point(const TargetModel& target, const std::vector<PermGroup>& groups,
                               const RegressionSpec& spec, std::size_t trials, std::size_t threads = 1) {
  detail::check_target(target, spec);
  if (trials < 2) throw ValidationError("Monte Carlo: need at least 2 trials");
  std::vector<SharingPattern> orbits;
  for (const auto& g : groups) {
    if (g.n() != spec.n_nodes) throw ValidationError("Monte Carlo: group degree differs from N");
    orbits.push_back(pair_orbits(g));
  }
  const double noise_floor = spec.sigma_xi2 * static_cast<double>(spec.nk());
  std::vector<double> ls(trials);
  std::vector<std::vector<double>> gaps(groups.size(), std::vector<double>(trials));
  parallel_for(trials, threads, [&](std::size_t t) {
    const auto data = sample_dataset(spec, target, substream(static_cast<std::uint32_t>(spec.n),
                                                             static_cast<std::uint32_t>(t)));
    const Eigen::MatrixXd theta_hat = least_squares(data.x, data.y).theta;
    const double err_ls = (target.theta - theta_hat).squaredNorm();
    ls[t] = (spec.sigma_x2 * err_ls + noise_floor) / static_cast<double>(spec.nk());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const Eigen::MatrixXd proj = project_via_orbits(theta_hat, orbits[gi], spec.d, spec.k);
      gaps[gi][t] = spec.sigma_x2 * (err_ls - (target.theta - proj).squaredNorm());
    }
  });
  McResult out;
  out.trials = trials;
  out.ls_risk = mean_stderr(ls);
  for (const auto& g : gaps) out.gaps.push_back(mean_stderr(g));
  return out;
}

// Monte Carlo risk gap with the closed form filled in when n > Nd + 1.
inline RiskReport mc_risk_gap(const TargetModel& target, const PermGroup& g, const RegressionSpec& spec,
                              std::size_t trials, std::size_t threads = 1) {
  const auto mc = mc_sweep_point(target, {g}, spec, trials, threads);
  RiskReport r;
  if (spec.n > spec.nd() + 1) r = theory_risk_gap(target, g, spec);
  r.group_label = g.label();
  r.n = spec.n;
  r.trials = trials;
  r.mc_gap = mc.gaps[0].mean;
  r.mc_stderr = mc.gaps[0].stderr_;
  return r;
}

// V = sigma_xi^2 (N^2 d k - (chi|chi)) / (n - Nd - 1). As printed, the
// character term is that of the output representation, (chi_psi|chi_psi);
// `as_printed = false` uses (chi_psi|chi_phi) instead. The two agree when d = k.
inline double coarsening_variance(const PermGroup& g, const RegressionSpec& spec, bool as_printed = true) {
  spec.validate();
  spec.require_determined();
  const double nn = static_cast<double>(spec.n_nodes);
  const double chi = static_cast<double>(as_printed ? char_inner_product(g, spec.k, spec.k)
                                                    : char_inner_product(g, spec.d, spec.k));
  return spec.sigma_xi2 * (nn * nn * static_cast<double>(spec.d * spec.k) - chi) /
         (static_cast<double>(spec.n) - static_cast<double>(spec.nd()) - 1.0);
}

inline double gap_bound_coarsening(double kappa_eps, const PermGroup& g, const RegressionSpec& spec) {
  if (!(kappa_eps >= 0.0)) throw ValidationError("kappa must be nonnegative");
  if (g.n() != spec.n_nodes) throw ValidationError("gap bound: group degree differs from N");
  const double v = coarsening_variance(g, spec);
  return -2.0 * kappa_eps * std::sqrt(v) + v;
}

// n at which the two theory gaps coincide; below it the larger group wins.
inline double crossing_sample_size(const TargetModel& target, const PermGroup& g_small, const PermGroup& g_large,
                                   const RegressionSpec& spec) {
  detail::check_target(target, spec);
  if (g_small.n() != spec.n_nodes || g_large.n() != spec.n_nodes)
    throw ValidationError("crossing: group degree differs from N");
  if (!g_small.is_subgroup_of(g_large)) {
    throw ValidationError("crossing: '" + g_small.label() + "' is not contained in '" + g_large.label() + "'");
  }
  if (anti_part(target.theta, g_small, spec.d, spec.k).norm() >= kEquivarianceTolerance) {
    throw ValidationError("crossing: theta is not equivariant to '" + g_small.label() + "'");
  }
  const double anti2 = anti_part(target.theta, g_large, spec.d, spec.k).squaredNorm();
  if (std::sqrt(anti2) < kEquivarianceTolerance) {
    throw NoCrossingError("crossing: theta is equivariant to '" + g_large.label() +
                          "'; the larger group has the smaller risk at every n");
  }
  const double dchi = static_cast<double>(char_inner_product(g_small, spec.d, spec.k)) -
                      static_cast<double>(char_inner_product(g_large, spec.d, spec.k));
  return static_cast<double>(spec.nd() + 1) + spec.sigma_xi2 * dchi / (spec.sigma_x2 * anti2);
}

// ||Psi_perp Theta||^2 that places the crossing at n_star.
inline double anti_norm2_for_crossing(double n_star, const PermGroup& g_small, const PermGroup& g_large,
                                      const RegressionSpec& spec) {
  spec.validate();
  const double base = static_cast<double>(spec.nd() + 1);
  if (!(n_star > base)) throw DomainError("crossing target must exceed Nd + 1");
  const double dchi = static_cast<double>(char_inner_product(g_small, spec.d, spec.k)) -
                      static_cast<double>(char_inner_product(g_large, spec.d, spec.k));
  return spec.sigma_xi2 * dchi / (spec.sigma_x2 * (n_star - base));
}

// Psi(Theta) + s Psi_perp(Theta) with s chosen so ||Psi_perp||_F^2 = anti_norm2.
// Equivariance to any subgroup Theta already respected is preserved.
inline Eigen::MatrixXd rescale_anti_part(const Eigen::MatrixXd& theta, const PermGroup& g, std::size_t d,
                                         std::size_t k, double anti_norm2) {
  const Eigen::MatrixXd sym = intertwiner_project(theta, g, d, k);
  const Eigen::MatrixXd anti = theta - sym;
  const double cur = anti.squaredNorm();
  if (cur == 0.0) throw DomainError("rescale: theta has no anti-symmetric part");
  return sym + std::sqrt(anti_norm2 / cur) * anti;
}

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct EquivarianceRate {
  double rate = 0.0;      // estimate of ||f - Q_G f||_mu
  double stderr_ = 0.0;   // delta-method standard error of `rate`
  double relative = 0.0;  // mean of ||f(g x) - g f(x)|| / ||f(x)|| over samples and g
  std::size_t samples = 0;
};

// Inputs x ~ N(0, sigma_x^2 I) of length Nd (node-major); f returns length Nk.
// Q_G f(x) = (1/|G|) sum_g g^-1 f(g x).
inline EquivarianceRate empirical_equivariance_rate(const VectorMap& f, const PermGroup& g, std::size_t samples,
                                                    const RegressionSpec& spec, std::uint64_t stream = 0) {
  spec.validate();
  if (g.n() != spec.n_nodes) throw ValidationError("equivariance rate: group degree differs from N");
  if (samples < 2) throw ValidationError("equivariance rate: need at least 2 samples");
  std::vector<Eigen::MatrixXd> act_in, act_out;
  for (const auto& e : g.elements()) {
    act_in.push_back(block_permutation_matrix(e, spec.d));
    act_out.push_back(block_permutation_matrix(e, spec.k));
  }
  Philox4x32 rng(spec.seed, stream);
  std::normal_distribution<double> nd(0.0, std::sqrt(spec.sigma_x2));
  std::vector<double> sq(samples), rel;
  rel.reserve(samples * g.order());
  Eigen::VectorXd x(static_cast<Eigen::Index>(spec.nd()));
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
    const Eigen::VectorXd fx = f(x);
    if (fx.size() != static_cast<Eigen::Index>(spec.nk()))
      throw ValidationError("equivariance rate: f returned a vector of the wrong length");
    Eigen::VectorXd q = Eigen::VectorXd::Zero(fx.size());
    const double fnorm = fx.norm();
    for (std::size_t e = 0; e < act_in.size(); ++e) {
      const Eigen::VectorXd fgx = f(act_in[e] * x);
      q += act_out[e].transpose() * fgx;
      if (fnorm > 0.0) rel.push_back((fgx - act_out[e] * fx).norm() / fnorm);
    }
    q /= static_cast<double>(act_in.size());
    sq[s] = (fx - q).squaredNorm();
  }
  const auto m = mean_stderr(sq);
  EquivarianceRate out;
  out.samples = samples;
  out.rate = std::sqrt(std::max(m.mean, 0.0));
  out.stderr_ = out.rate > 0.0 ? m.stderr_ / (2.0 * out.rate) : 0.0;
  out.relative = rel.empty() ? 0.0 : pairwise_sum(rel) / static_cast<double>(rel.size());
  return out;
}

}  // namespace symsel
