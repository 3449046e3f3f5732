#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "symsel/equivmap.hpp"
#include "symsel/error.hpp"
#include "symsel/gnet.hpp"
#include "symsel/parallel.hpp"
#include "symsel/perm.hpp"
#include "symsel/rng.hpp"
#include "symsel/stats.hpp"

namespace symsel {

// Left-right reflection of the P x P patch grid, (R, C) -> (R, P - 1 - C).
inline Permutation patch_reflection(std::size_t per_row) {
  std::vector<int> img(per_row * per_row);
  for (std::size_t r = 0; r < per_row; ++r)
    for (std::size_t c = 0; c < per_row; ++c)
      img[r * per_row + c] = static_cast<int>(r * per_row + (per_row - 1 - c));
  return Permutation(std::move(img));
}

namespace detail {

inline std::size_t checked_patches_per_row(std::size_t grid_side, std::size_t patch, bool reflection) {
  if (patch == 0 || grid_side % patch != 0) {
    throw ValidationError("patch size " + std::to_string(patch) + " does not divide grid side " +
                          std::to_string(grid_side));
  }
  const std::size_t per_row = grid_side / patch;
  if (reflection && per_row > 1 && per_row % 2 == 1) {
    throw ValidationError("reflection ties need an even number of patch columns, got " + std::to_string(per_row));
  }
  return per_row;
}

}  // namespace detail

// Generators of the coarsening-induced group of a grid split into square
// patches, optionally with the patch reflection as coarse symmetry.
inline std::vector<Permutation> patch_group_generators(std::size_t grid_side, std::size_t patch, bool reflection) {
  const std::size_t per_row = detail::checked_patches_per_row(grid_side, patch, reflection);
  const auto assignment = ClusterAssignment::grid_patches(grid_side, patch);
  auto gens = cluster_transpositions(assignment);
  if (reflection && per_row > 1) gens.push_back(blow_up_permutation(assignment, patch_reflection(per_row)));
  return gens;
}

// With a single patch the reflection acts trivially on the coarse graph and
// the group is S_N.
inline PermGroup reflection_tied_group(std::size_t grid_side, std::size_t patch, std::size_t cap = kDefaultElementCap) {
  const std::size_t per_row = detail::checked_patches_per_row(grid_side, patch, true);
  const auto assignment = ClusterAssignment::grid_patches(grid_side, patch);
  const PermGroup coarse = per_row > 1 ? close(per_row * per_row, {patch_reflection(per_row)}, 2, "reflection")
                                       : trivial_group(1);
  return induced_symmetry_group(assignment, coarse, cap);
}

struct InpaintConfig {
  std::size_t grid_side = 8;
  std::vector<std::size_t> patch_sizes{8, 4, 2, 1};
  std::size_t n_train = 24;
  std::size_t n_test = 200;
  std::size_t mask_side = 3;
  std::size_t seeds = 10;
  std::size_t hidden = 4;
  bool reflection = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  // grid-cosine modes (u, v) mixed into each signal
  std::vector<std::pair<int, int>> modes{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  TrainConfig train{};
};

struct InpaintRow {
  std::size_t patch = 0;
  std::size_t orbit_count = 0;
  std::size_t parameter_count = 0;
  double mean_mse = 0.0;
  double std_mse = 0.0;
  double median_mse = 0.0;
  std::vector<double> per_seed;
};

struct InpaintData {
  Eigen::MatrixXd clean;   // N x count, one signal per column
  Eigen::MatrixXd masked;  // clean with a square zeroed
};

// Random mixtures of separable cosines, min-max scaled to [0, 1], each with a
// uniformly placed mask_side x mask_side square set to zero.
inline InpaintData inpaint_signals(const InpaintConfig& cfg, std::size_t count, Philox4x32& rng) {
  const std::size_t g = cfg.grid_side;
  if (cfg.mask_side > g) throw ValidationError("mask side exceeds grid side");
  std::normal_distribution<double> nd(0.0, 1.0);
  InpaintData out;
  out.clean.resize(static_cast<Eigen::Index>(g * g), static_cast<Eigen::Index>(count));
  for (std::size_t s = 0; s < count; ++s) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g * g));
    for (auto [u, v] : cfg.modes) {
      const double c = nd(rng);
      for (std::size_t r = 0; r < g; ++r)
        for (std::size_t col = 0; col < g; ++col)
          x(static_cast<Eigen::Index>(r * g + col)) +=
              c * std::cos(std::numbers::pi * u * (static_cast<double>(r) + 0.5) / static_cast<double>(g)) *
              std::cos(std::numbers::pi * v * (static_cast<double>(col) + 0.5) / static_cast<double>(g));
    }
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    if (hi > lo) {
      x = ((x.array() - lo) / (hi - lo)).matrix();
    } else {
      x.setZero();
    }
    out.clean.col(static_cast<Eigen::Index>(s)) = x;
  }
  out.masked = out.clean;
  const std::size_t span = g - cfg.mask_side + 1;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t r0 = rng() % span, c0 = rng() % span;
    for (std::size_t r = r0; r < r0 + cfg.mask_side; ++r)
      for (std::size_t c = c0; c < c0 + cfg.mask_side; ++c)
        out.masked(static_cast<Eigen::Index>(r * g + c), static_cast<Eigen::Index>(s)) = 0.0;
  }
  return out;
}

inline Network inpaint_network(const SharingPattern& pattern, std::size_t hidden) {
  return Network({make_layer(Variant::strict, pattern, 1, hidden), make_layer(Variant::strict, pattern, hidden, 1)});
}

// Test MSE of a 2-layer strict network for each patch size and seed. Seed s
// draws its data from substream (s, 0) and initial weights from (s, 1), so
// every patch size sees the same signals and masks.
inline std::vector<InpaintRow> inpaint_experiment(const InpaintConfig& cfg) {
  if (cfg.patch_sizes.empty()) throw ValidationError("inpaint: no patch sizes");
  if (cfg.seeds == 0 || cfg.n_train == 0 || cfg.n_test == 0) throw ValidationError("inpaint: empty experiment");
  std::vector<SharingPattern> patterns;
  for (auto p : cfg.patch_sizes) {
    const auto gens = patch_group_generators(cfg.grid_side, p, cfg.reflection);
    patterns.push_back(pair_orbits_from_generators(cfg.grid_side * cfg.grid_side, gens));
  }
  const std::size_t runs = cfg.patch_sizes.size() * cfg.seeds;
  std::vector<double> mse(runs);
  parallel_for(runs, cfg.threads, [&](std::size_t job) {
    const std::size_t pi = job / cfg.seeds, s = job % cfg.seeds;
    Philox4x32 data_rng(cfg.seed, substream(static_cast<std::uint32_t>(s), 0));
    const auto train_set = inpaint_signals(cfg, cfg.n_train, data_rng);
    const auto test_set = inpaint_signals(cfg, cfg.n_test, data_rng);
    Network net = inpaint_network(patterns[pi], cfg.hidden);
    net.initialize(substream(static_cast<std::uint32_t>(s), 1) ^ cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + s;
    symsel::train(net, train_set.masked, train_set.clean, tc);
    mse[job] = loss_mse(net.forward_batch(test_set.masked), test_set.clean);
  });
  std::vector<InpaintRow> rows;
  for (std::size_t pi = 0; pi < cfg.patch_sizes.size(); ++pi) {
    InpaintRow row;
    row.patch = cfg.patch_sizes[pi];
    row.orbit_count = patterns[pi].orbit_count;
    row.parameter_count = inpaint_network(patterns[pi], cfg.hidden).parameter_count();
    row.per_seed.assign(mse.begin() + static_cast<std::ptrdiff_t>(pi * cfg.seeds),
                        mse.begin() + static_cast<std::ptrdiff_t>((pi + 1) * cfg.seeds));
    const auto ms = mean_stderr(row.per_seed);
    row.mean_mse = ms.mean;
    row.std_mse = ms.stderr_ * std::sqrt(static_cast<double>(cfg.seeds));
    std::vector<double> sorted = row.per_seed;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    row.median_mse = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Some interior row has median MSE at most both endpoints.
inline bool is_u_shaped(const std::vector<InpaintRow>& rows) {
  if (rows.size() < 3) return false;
  const double lo = std::min(rows.front().median_mse, rows.back().median_mse);
  for (std::size_t i = 1; i + 1 < rows.size(); ++i)
    if (rows[i].median_mse <= lo) return true;
  return false;
}

}  // namespace symsel
