#pragma once

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "symsel/equivmap.hpp"
#include "symsel/error.hpp"
#include "symsel/gnet.hpp"
#include "symsel/graph.hpp"
#include "symsel/graphcoarse.hpp"
#include "symsel/inpaint.hpp"
#include "symsel/io.hpp"
#include "symsel/parallel.hpp"
#include "symsel/perm.hpp"
#include "symsel/regress.hpp"
#include "symsel/rng.hpp"

namespace symsel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;

// Where a group comes from, shared by every subcommand that needs one.
struct GroupSource {
  std::string graph, assign, group_file;
  std::size_t n = 0;
  std::size_t cap = kDefaultElementCap;
};

struct Inputs {
  std::optional<Graph> graph;
  std::optional<ClusterAssignment> assignment;
  std::size_t n = 0;
};

namespace detail {

inline void add_source_options(CLI::App* sub, GroupSource& src, bool need_assign_opt = true) {
  sub->add_option("--graph", src.graph, "graph JSON file")->check(CLI::ExistingFile);
  if (need_assign_opt) sub->add_option("--assign", src.assign, "cluster assignment JSON file")->check(CLI::ExistingFile);
  sub->add_option("--group-file", src.group_file, "group JSON file (for --group file)")->check(CLI::ExistingFile);
  sub->add_option("--n", src.n, "node count when no graph is given")->check(CLI::PositiveNumber);
  sub->add_option("--cap", src.cap, "group element cap")->check(CLI::PositiveNumber)->capture_default_str();
}

inline const std::vector<std::string>& group_tokens() {
  static const std::vector<std::string> t{"trivial", "sn", "aut", "coarse", "file"};
  return t;
}

inline Inputs load_inputs(const GroupSource& src) {
  Inputs in;
  if (!src.graph.empty()) in.graph = io::graph_from_json(io::read_json(src.graph));
  if (!src.assign.empty()) in.assignment = io::assignment_from_json(io::read_json(src.assign));
  if (in.graph) {
    if (src.n != 0 && src.n != in.graph->n())
      throw ValidationError("--n " + std::to_string(src.n) + " disagrees with the graph's " + std::to_string(in.graph->n()) + " nodes");
    in.n = in.graph->n();
  } else {
    in.n = src.n;
  }
  if (in.assignment && in.n != 0 && in.assignment->n() != in.n) {
    throw ValidationError("--assign covers " + std::to_string(in.assignment->n()) + " nodes, expected " + std::to_string(in.n));
  }
  if (in.assignment && in.n == 0) in.n = in.assignment->n();
  return in;
}

// Checks that `token` can be built from the inputs; no group is constructed.
inline void check_group_token(const std::string& token, const GroupSource& src, const Inputs& in, const char* flag) {
  const std::string f(flag);
  if (token == "aut" && !in.graph) throw ValidationError(f + " aut needs --graph");
  if (token == "coarse" && (!in.graph || !in.assignment)) throw ValidationError(f + " coarse needs --graph and --assign");
  if (token == "file" && src.group_file.empty()) throw ValidationError(f + " file needs --group-file");
  if ((token == "trivial" || token == "sn") && in.n == 0) throw ValidationError(f + " " + token + " needs --graph or --n");
}

inline PermGroup build(const std::string& token, const GroupSource& src, const Inputs& in) {
  PermGroup g = [&] {
    if (token == "trivial") return trivial_group(in.n);
    if (token == "sn") return build_group(GroupSpec{GroupSpec::FullSymmetric{in.n}, src.cap});
    if (token == "aut") return automorphism_group(*in.graph, src.cap);
    if (token == "coarse") {
      const CoarseGraph gc = coarsen(*in.graph, *in.assignment);
      return induced_symmetry_group(*in.graph, gc, *in.assignment, src.cap);
    }
    return io::group_from_json(io::read_json(src.group_file), src.cap);
  }();
  if (in.n != 0 && g.n() != in.n) {
    throw ValidationError("group from --group-file acts on " + std::to_string(g.n()) + " points, expected " + std::to_string(in.n));
  }
  g.set_label(token);
  return g;
}

inline std::string format_nstar(double v) {
  std::string s = io::format_double(v);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

inline void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    io::write_file_atomic(out_path, text);
  }
}

inline void print_group(const PermGroup& g, std::ostream& out) {
  out << "order: " << g.order() << '\n';
  if (g.generators().empty()) out << "generator: e\n";
  for (const auto& p : g.generators()) out << "generator: " << p.cycle_string() << '\n';
}

// d and k come from the model file; explicit flags must agree with it.
inline void reconcile_dims(const CLI::App* sub, const io::LinearModel& m, std::size_t& d, std::size_t& k) {
  if (sub->count("--d") && d != m.d) throw ValidationError("--d " + std::to_string(d) + " disagrees with the theta file");
  if (sub->count("--k") && k != m.k) throw ValidationError("--k " + std::to_string(k) + " disagrees with the theta file");
  d = m.d;
  k = m.k;
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"symmetry model selection on graph signals", "symsel"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  GroupSource src;
  std::string out_path, group_token = "trivial", theta_path;
  std::vector<std::string> group_list;
  std::size_t d = 1, k = 1, trials = 1000, threads = 0, n_min = 0, n_max = 0, n_step = 1, samples = 1000;
  std::size_t cut_limit = kCutNormExhaustiveLimit;
  double sigma_x2 = 1.0, sigma_xi2 = 1.0;
  std::uint64_t seed = 0;

  // aut
  auto* aut = app.add_subcommand("aut", "automorphism group of a graph");
  aut->add_option("--graph", src.graph, "graph JSON file")->required()->check(CLI::ExistingFile);
  aut->add_option("--cap", src.cap, "group element cap")->check(CLI::PositiveNumber);
  aut->add_option("--out", out_path, "write the group as JSON");

  // coarsen
  auto* crs = app.add_subcommand("coarsen", "coarse graph and coarsening error");
  crs->add_option("--graph", src.graph, "graph JSON file")->required()->check(CLI::ExistingFile);
  crs->add_option("--assign", src.assign, "cluster assignment JSON file")->required()->check(CLI::ExistingFile);
  crs->add_option("--cut-limit", cut_limit, "largest N for the exact cut norm")->check(CLI::Range(1, 24));
  crs->add_option("--out", out_path, "write the coarse graph as JSON");

  // group
  auto* grp = app.add_subcommand("group", "build a symmetry group; prints order and generators");
  detail::add_source_options(grp, src);
  grp->add_option("--group", group_token, "trivial|sn|aut|coarse|file")->check(CLI::IsMember(detail::group_tokens()));
  grp->add_option("--out", out_path, "write the group as JSON");

  // basis
  auto* bas = app.add_subcommand("basis", "pair-orbit count and parameter counts");
  detail::add_source_options(bas, src);
  bas->add_option("--group", group_token, "trivial|sn|aut|coarse|file")->check(CLI::IsMember(detail::group_tokens()));
  bas->add_option("--d", d, "input channels")->check(CLI::PositiveNumber);
  bas->add_option("--k", k, "output channels")->check(CLI::PositiveNumber);

  // risk
  auto* rsk = app.add_subcommand("risk", "theory and Monte Carlo risk gap sweep (CSV)");
  detail::add_source_options(rsk, src);
  rsk->add_option("--group", group_list, "trivial|sn|aut|coarse|file, repeatable")
      ->check(CLI::IsMember(detail::group_tokens()));
  rsk->add_option("--theta", theta_path, "target linear model JSON (default: zero map)")->check(CLI::ExistingFile);
  rsk->add_option("--d", d, "input channels")->check(CLI::PositiveNumber);
  rsk->add_option("--k", k, "output channels")->check(CLI::PositiveNumber);
  rsk->add_option("--sigma-x2", sigma_x2, "input variance")->check(CLI::PositiveNumber);
  rsk->add_option("--sigma-xi2", sigma_xi2, "noise variance")->check(CLI::NonNegativeNumber);
  rsk->add_option("--n-min", n_min, "smallest sample size")->required()->check(CLI::PositiveNumber);
  rsk->add_option("--n-max", n_max, "largest sample size")->required()->check(CLI::PositiveNumber);
  rsk->add_option("--n-step", n_step, "sample size step")->check(CLI::PositiveNumber);
  rsk->add_option("--trials", trials, "Monte Carlo trials per point")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  rsk->add_option("--seed", seed, "base seed");
  rsk->add_option("--threads", threads, "worker threads (0: all cores)");
  rsk->add_option("--out", out_path, "CSV output path (default: stdout)");

  // crossing
  std::string small_token = "aut", large_token = "sn", small_file, large_file, theta_out;
  double target_n = 0.0;
  auto* crx = app.add_subcommand("crossing", "sample size where two groups' risk gaps coincide");
  crx->add_option("--graph", src.graph, "graph JSON file")->check(CLI::ExistingFile);
  crx->add_option("--assign", src.assign, "cluster assignment JSON file")->check(CLI::ExistingFile);
  crx->add_option("--n", src.n, "node count when no graph is given")->check(CLI::PositiveNumber);
  crx->add_option("--cap", src.cap, "group element cap")->check(CLI::PositiveNumber);
  crx->add_option("--group-small", small_token, "smaller group")->check(CLI::IsMember(detail::group_tokens()));
  crx->add_option("--group-large", large_token, "larger group")->check(CLI::IsMember(detail::group_tokens()));
  crx->add_option("--group-file-small", small_file, "group JSON for --group-small file")->check(CLI::ExistingFile);
  crx->add_option("--group-file-large", large_file, "group JSON for --group-large file")->check(CLI::ExistingFile);
  crx->add_option("--theta", theta_path, "target linear model JSON")->required()->check(CLI::ExistingFile);
  crx->add_option("--sigma-x2", sigma_x2, "input variance")->check(CLI::PositiveNumber);
  crx->add_option("--sigma-xi2", sigma_xi2, "noise variance")->check(CLI::NonNegativeNumber);
  crx->add_option("--target-n", target_n, "rescale theta's anti-part so the crossing lands here")->check(CLI::PositiveNumber);
  crx->add_option("--theta-out", theta_out, "write the rescaled theta (needs --target-n)");

  // kappa
  auto* kap = app.add_subcommand("kappa", "empirical equivariance rate of a linear model");
  detail::add_source_options(kap, src);
  kap->add_option("--group", group_token, "trivial|sn|aut|coarse|file")->check(CLI::IsMember(detail::group_tokens()));
  kap->add_option("--theta", theta_path, "linear model JSON")->required()->check(CLI::ExistingFile);
  kap->add_option("--samples", samples, "Monte Carlo samples")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  kap->add_option("--sigma-x2", sigma_x2, "input variance")->check(CLI::PositiveNumber);
  kap->add_option("--seed", seed, "base seed");

  // train
  std::string variant_str = "strict", optimizer_str = "adam", params_out;
  std::size_t hidden = 0, n_train = 64, n_test = 256;
  TrainConfig tc;
  auto* trn = app.add_subcommand("train", "train a G-Net on a synthetic linear teacher");
  detail::add_source_options(trn, src);
  trn->add_option("--group", group_token, "trivial|sn|aut|coarse|file")->check(CLI::IsMember(detail::group_tokens()));
  trn->add_option("--variant", variant_str, "layer variant")->check(CLI::IsMember({"strict", "relax", "gc", "gc_ew", "pt_ew"}));
  trn->add_option("--theta", theta_path, "teacher linear model JSON (default: random G-equivariant)")
      ->check(CLI::ExistingFile);
  trn->add_option("--d", d, "input channels")->check(CLI::PositiveNumber);
  trn->add_option("--k", k, "output channels")->check(CLI::PositiveNumber);
  trn->add_option("--hidden", hidden, "hidden channels (0: single linear layer)");
  trn->add_option("--n-train", n_train, "training samples")->check(CLI::PositiveNumber);
  trn->add_option("--n-test", n_test, "test samples")->check(CLI::PositiveNumber);
  trn->add_option("--sigma-x2", sigma_x2, "input variance")->check(CLI::PositiveNumber);
  trn->add_option("--sigma-xi2", sigma_xi2, "noise variance")->check(CLI::NonNegativeNumber);
  trn->add_option("--epochs", tc.epochs, "epochs");
  trn->add_option("--lr", tc.lr, "learning rate")->check(CLI::NonNegativeNumber);
  trn->add_option("--batch", tc.batch, "minibatch size (0: full batch)");
  trn->add_option("--optimizer", optimizer_str, "adam|sgd")->check(CLI::IsMember({"adam", "sgd"}));
  trn->add_option("--seed", seed, "base seed");
  trn->add_option("--out", out_path, "loss trace CSV (default: stdout)");
  trn->add_option("--params-out", params_out, "write trained parameters as JSON");

  // inpaint
  InpaintConfig ic;
  ic.train.epochs = 300;
  auto* inp = app.add_subcommand("inpaint", "patch-size sweep on a masked grid inpainting task (CSV)");
  inp->add_option("--grid", ic.grid_side, "grid side")->check(CLI::Range(1, 64));
  inp->add_option("--patches", ic.patch_sizes, "patch sizes, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
  inp->add_option("--n-train", ic.n_train, "training signals")->check(CLI::PositiveNumber);
  inp->add_option("--n-test", ic.n_test, "test signals")->check(CLI::PositiveNumber);
  inp->add_option("--mask", ic.mask_side, "side of the zeroed square");
  inp->add_option("--seeds", ic.seeds, "independent seeds per patch size")->check(CLI::PositiveNumber);
  inp->add_option("--hidden", ic.hidden, "hidden channels")->check(CLI::PositiveNumber);
  inp->add_option("--epochs", ic.train.epochs, "epochs");
  inp->add_option("--lr", ic.train.lr, "learning rate")->check(CLI::NonNegativeNumber);
  inp->add_option("--optimizer", optimizer_str, "adam|sgd")->check(CLI::IsMember({"adam", "sgd"}));
  inp->add_flag("--reflection", ic.reflection, "tie mirrored patches");
  inp->add_option("--seed", seed, "base seed");
  inp->add_option("--threads", threads, "worker threads (0: all cores)");
  inp->add_option("--out", out_path, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*aut) {
      const Graph g = io::graph_from_json(io::read_json(src.graph));
      const PermGroup a = automorphism_group(g, src.cap);
      detail::print_group(a, out);
      if (!out_path.empty()) io::write_file_atomic(out_path, io::group_to_json(a).dump(2) + "\n");
    } else if (*crs) {
      const auto in = detail::load_inputs(src);
      const CoarseGraph gc = coarsen(*in.graph, *in.assignment);
      const auto e = coarsening_error(*in.graph, gc, *in.assignment, cut_limit);
      out << "clusters: " << gc.m() << '\n';
      out << "counts:";
      for (auto c : gc.counts()) out << ' ' << c;
      out << "\nnode_weights:";
      for (const auto& w : gc.node_weights()) out << ' ' << io::rational_string(w);
      out << "\nadjacency:\n";
      for (Eigen::Index i = 0; i < gc.adjacency().rows(); ++i) {
        for (Eigen::Index j = 0; j < gc.adjacency().cols(); ++j) out << (j ? " " : "  ") << io::format_double(gc.adjacency()(i, j));
        out << '\n';
      }
      out << "coarsening_error: " << io::format_double(e.value) << (e.exact ? " (exact)" : " (heuristic lower bound)") << '\n';
      if (!out_path.empty()) io::write_file_atomic(out_path, io::coarse_graph_to_json(gc).dump(2) + "\n");
    } else if (*grp) {
      const auto in = detail::load_inputs(src);
      detail::check_group_token(group_token, src, in, "--group");
      const PermGroup g = detail::build(group_token, src, in);
      out << "group: " << g.label() << '\n';
      detail::print_group(g, out);
      if (!out_path.empty()) io::write_file_atomic(out_path, io::group_to_json(g).dump(2) + "\n");
    } else if (*bas) {
      const auto in = detail::load_inputs(src);
      detail::check_group_token(group_token, src, in, "--group");
      const PermGroup g = detail::build(group_token, src, in);
      const auto orbits = pair_orbits(g);
      const std::size_t n = g.n();
      out << "group: " << g.label() << '\n';
      out << "order: " << g.order() << '\n';
      out << "pair_orbits: " << orbits.orbit_count << '\n';
      out << "parameters: " << char_inner_product(g, d, k) << '\n';
      out << "dense_parameters: " << n * n * d * k << '\n';
      if (in.assignment && in.graph) {
        const PermGroup coarse = automorphism_group(coarsen(*in.graph, *in.assignment), src.cap);
        out << "block_form_free_scalars: " << block_form(*in.assignment, coarse).free_scalar_count() << '\n';
      }
    } else if (*rsk) {
      if (n_min > n_max) throw ValidationError("--n-min exceeds --n-max");
      if (group_list.empty()) group_list.push_back("trivial");
      std::optional<io::LinearModel> model;
      if (!theta_path.empty()) {
        model = io::linear_model_from_json(io::read_json(theta_path));
        detail::reconcile_dims(rsk, *model, d, k);
        if (src.n == 0 && src.graph.empty()) src.n = model->n;
      }
      const auto in = detail::load_inputs(src);
      for (const auto& t : group_list) detail::check_group_token(t, src, in, "--group");
      if (model && model->n != in.n) throw ValidationError("--theta has N = " + std::to_string(model->n) + ", expected " + std::to_string(in.n));
      RegressionSpec spec{in.n, d, k, 0, sigma_x2, sigma_xi2, seed};
      spec.validate();
      const TargetModel target(model ? model->theta
                                     : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(in.n * d), static_cast<Eigen::Index>(in.n * k)));
      std::vector<PermGroup> groups;
      for (const auto& t : group_list) groups.push_back(detail::build(t, src, in));
      const std::size_t workers = resolve_threads(threads);

      io::CsvWriter csv;
      csv.meta("command", "risk");
      csv.meta("seed", std::to_string(seed));
      csv.meta("trials", std::to_string(trials));
      csv.meta("sigma_x2", io::format_double(sigma_x2));
      csv.meta("sigma_xi2", io::format_double(sigma_xi2));
      csv.header({"group_label", "n", "trials", "theory_gap", "bias", "variance", "mc_gap", "mc_stderr"});
      std::vector<std::vector<std::vector<std::string>>> by_group(groups.size());
      for (std::size_t n = n_min; n <= n_max; n += n_step) {
        spec.n = n;
        const auto mc = mc_sweep_point(target, groups, spec, trials, workers);
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
          RiskReport r;
          if (n > spec.nd() + 1) r = theory_risk_gap(target, groups[gi], spec);
          by_group[gi].push_back({groups[gi].label(), std::to_string(n), std::to_string(trials), io::format_double(r.theory_gap),
                                  io::format_double(r.bias_term), io::format_double(r.variance_term),
                                  io::format_double(mc.gaps[gi].mean), io::format_double(mc.gaps[gi].stderr_)});
        }
        if (n_max - n < n_step) break;
      }
      for (const auto& g : by_group)
        for (const auto& row : g) csv.row_strings(row);
      detail::emit(out_path, csv.str(), out);
    } else if (*crx) {
      const auto model = io::linear_model_from_json(io::read_json(theta_path));
      if (src.n == 0 && src.graph.empty()) src.n = model.n;
      const auto in = detail::load_inputs(src);
      if (model.n != in.n) throw ValidationError("--theta has N = " + std::to_string(model.n) + ", expected " + std::to_string(in.n));
      GroupSource small_src = src, large_src = src;
      small_src.group_file = small_file;
      large_src.group_file = large_file;
      detail::check_group_token(small_token, small_src, in, "--group-small");
      detail::check_group_token(large_token, large_src, in, "--group-large");
      if (!theta_out.empty() && target_n == 0.0) throw ValidationError("--theta-out needs --target-n");
      RegressionSpec spec{in.n, model.d, model.k, 0, sigma_x2, sigma_xi2, seed};
      spec.validate();
      const PermGroup gs = detail::build(small_token, small_src, in);
      PermGroup gl = detail::build(large_token, large_src, in);
      Eigen::MatrixXd theta = model.theta;
      if (target_n > 0.0) {
        const double a2 = anti_norm2_for_crossing(target_n, gs, gl, spec);
        theta = rescale_anti_part(theta, gl, model.d, model.k, a2);
        out << "anti_norm2: " << io::format_double(a2) << '\n';
        if (!theta_out.empty()) io::write_file_atomic(theta_out, io::linear_model_to_string({model.n, model.d, model.k, theta}));
      }
      const double n_star = crossing_sample_size(TargetModel(theta), gs, gl, spec);
      out << "chi_small: " << char_inner_product(gs, model.d, model.k) << '\n';
      out << "chi_large: " << char_inner_product(gl, model.d, model.k) << '\n';
      out << "n* = " << detail::format_nstar(n_star) << '\n';
    } else if (*kap) {
      const auto model = io::linear_model_from_json(io::read_json(theta_path));
      if (src.n == 0 && src.graph.empty()) src.n = model.n;
      const auto in = detail::load_inputs(src);
      if (model.n != in.n) throw ValidationError("--theta has N = " + std::to_string(model.n) + ", expected " + std::to_string(in.n));
      detail::check_group_token(group_token, src, in, "--group");
      RegressionSpec spec{in.n, model.d, model.k, 0, sigma_x2, 0.0, seed};
      spec.validate();
      const PermGroup g = detail::build(group_token, src, in);
      const Eigen::MatrixXd theta_t = model.theta.transpose();
      const auto rate = empirical_equivariance_rate([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return theta_t * x; },
                                                    g, samples, spec);
      const double closed = std::sqrt(sigma_x2) * anti_part(model.theta, g, model.d, model.k).norm();
      out << "seed: " << seed << '\n';
      out << "group: " << g.label() << '\n';
      out << "rate: " << io::format_double(rate.rate) << '\n';
      out << "stderr: " << io::format_double(rate.stderr_) << '\n';
      out << "relative_error: " << io::format_double(rate.relative) << '\n';
      out << "closed_form: " << io::format_double(closed) << '\n';
    } else if (*trn) {
      const Variant variant = parse_variant(variant_str);
      tc.optimizer = optimizer_str == "sgd" ? Optimizer::sgd : Optimizer::adam;
      tc.seed = seed;
      std::optional<io::LinearModel> model;
      if (!theta_path.empty()) {
        model = io::linear_model_from_json(io::read_json(theta_path));
        detail::reconcile_dims(trn, *model, d, k);
        if (src.n == 0 && src.graph.empty()) src.n = model->n;
      }
      const auto in = detail::load_inputs(src);
      if (model && model->n != in.n) throw ValidationError("--theta has N = " + std::to_string(model->n) + ", expected " + std::to_string(in.n));
      detail::check_group_token(group_token, src, in, "--group");
      if (needs_graph(variant) && !in.graph) throw ValidationError("--variant " + variant_str + " needs --graph");
      const PermGroup g = detail::build(group_token, src, in);
      const std::size_t n = in.n;
      const auto nd = static_cast<Eigen::Index>(n * d), nk = static_cast<Eigen::Index>(n * k);

      Eigen::MatrixXd teacher;
      if (model) {
        teacher = model->theta;
      } else {
        Philox4x32 rng(seed, substream(0, 0));
        teacher.resize(nd, nk);
        symsel::detail::fill_normal(teacher, 1.0 / static_cast<double>(n * d), rng);
        teacher = project_via_orbits(teacher, pair_orbits_from_generators(n, g.generators()), d, k);
      }
      auto sample = [&](std::size_t count, std::uint32_t stream, Eigen::MatrixXd& xb, Eigen::MatrixXd& yb) {
        Philox4x32 rng(seed, substream(1, stream));
        xb.resize(nd, static_cast<Eigen::Index>(count));
        symsel::detail::fill_normal(xb, sigma_x2, rng);
        yb = teacher.transpose() * xb;
        if (sigma_xi2 > 0.0) {
          Eigen::MatrixXd noise(nk, static_cast<Eigen::Index>(count));
          symsel::detail::fill_normal(noise, sigma_xi2, rng);
          yb += noise;
        }
      };
      Eigen::MatrixXd xtr, ytr, xte, yte;
      sample(n_train, 0, xtr, ytr);
      sample(n_test, 1, xte, yte);

      const SharingPattern pattern = variant == Variant::relax ? relax_pattern(n) : pair_orbits_from_generators(n, g.generators());
      const std::optional<Graph> graph = needs_graph(variant) ? in.graph : std::nullopt;
      std::vector<LayerSpec> layers;
      if (hidden == 0) {
        layers.push_back(make_layer(variant, pattern, d, k, graph));
      } else {
        layers.push_back(make_layer(variant, pattern, d, hidden, graph));
        layers.push_back(make_layer(variant, pattern, hidden, k, graph));
      }
      Network net(std::move(layers));
      net.initialize(substream(2, 0) ^ seed);
      const auto result = train(net, xtr, ytr, tc);
      const double test = loss_mse(net.forward_batch(xte), yte);

      io::CsvWriter csv;
      csv.meta("command", "train");
      csv.meta("seed", std::to_string(seed));
      csv.meta("variant", variant_str);
      csv.meta("group", g.label());
      csv.meta("parameters", std::to_string(net.parameter_count()));
      csv.meta("test_mse", io::format_double(test));
      csv.header({"epoch", "train_loss"});
      for (std::size_t e = 0; e < result.loss_trace.size(); ++e) csv.row_strings({std::to_string(e), io::format_double(result.loss_trace[e])});
      detail::emit(out_path, csv.str(), out);
      if (!params_out.empty()) io::write_file_atomic(params_out, io::network_to_json(net).dump(2) + "\n");
    } else if (*inp) {
      ic.seed = seed;
      ic.threads = resolve_threads(threads);
      ic.train.optimizer = optimizer_str == "sgd" ? Optimizer::sgd : Optimizer::adam;
      if (ic.mask_side > ic.grid_side) throw ValidationError("--mask exceeds --grid");
      for (auto p : ic.patch_sizes) symsel::detail::checked_patches_per_row(ic.grid_side, p, ic.reflection);
      const auto rows = inpaint_experiment(ic);
      io::CsvWriter csv;
      csv.meta("command", "inpaint");
      csv.meta("seed", std::to_string(seed));
      csv.meta("seeds", std::to_string(ic.seeds));
      csv.meta("epochs", std::to_string(ic.train.epochs));
      csv.meta("lr", io::format_double(ic.train.lr));
      csv.meta("reflection", ic.reflection ? "1" : "0");
      csv.meta("u_shaped", is_u_shaped(rows) ? "1" : "0");
      csv.header({"patch", "orbit_count", "parameter_count", "median_mse", "mean_mse", "std_mse"});
      for (const auto& r : rows) {
        csv.row_strings({std::to_string(r.patch), std::to_string(r.orbit_count), std::to_string(r.parameter_count),
                         io::format_double(r.median_mse), io::format_double(r.mean_mse), io::format_double(r.std_mse)});
      }
      detail::emit(out_path, csv.str(), out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "; raise it with --cap\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"symsel"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace symsel::cli
