#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "symsel/equivmap.hpp"
#include "symsel/error.hpp"
#include "symsel/graph.hpp"
#include "symsel/rng.hpp"
#include "symsel/tape.hpp"

namespace symsel {

enum class Variant { strict, gc, gc_ew, pt_ew, relax };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::strict: return "strict";
    case Variant::gc: return "gc";
    case Variant::gc_ew: return "gc_ew";
    case Variant::pt_ew: return "pt_ew";
    case Variant::relax: return "relax";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::strict, Variant::gc, Variant::gc_ew, Variant::pt_ew, Variant::relax})
    if (variant_name(v) == s) return v;
  throw ValidationError("unknown layer variant '" + std::string(s) + "'");
}

inline bool needs_graph(Variant v) { return v == Variant::gc || v == Variant::gc_ew || v == Variant::pt_ew; }

struct LayerSpec {
  Variant variant = Variant::strict;
  std::shared_ptr<const SharingPattern> pattern;
  std::optional<Graph> graph;
  std::size_t d = 1;
  std::size_t k = 1;
  bool bias = true;
};

inline LayerSpec make_layer(Variant variant, SharingPattern pattern, std::size_t d, std::size_t k,
                            std::optional<Graph> graph = std::nullopt, bool bias = true) {
  return LayerSpec{variant, std::make_shared<const SharingPattern>(std::move(pattern)), std::move(graph), d, k, bias};
}

// Per-entry sharing classes of a block-form pattern: diagonal of cluster m,
// off-diagonal of cluster m and each cross block. The diagonal class carries
// a_m + b_m as a single free weight, which spans the same maps.
inline SharingPattern block_form_sharing(const BlockFormPattern& bf) {
  const auto& a = bf.assignment();
  const std::size_t n = a.n();
  std::vector<int> raw(n * n);
  const int classes = static_cast<int>(bf.free_scalar_count());
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      const auto cu = static_cast<std::size_t>(a.cluster_of(u)), cv = static_cast<std::size_t>(a.cluster_of(v));
      if (cu != cv) {
        raw[u * n + v] = bf.class_of(bf.e_index(cu, cv));
      } else if (u == v) {
        raw[u * n + v] = classes + bf.class_of(bf.a_index(cu));  // keep diagonal classes apart from b's
      } else {
        raw[u * n + v] = bf.class_of(bf.b_index(cu));
      }
    }
  std::unordered_map<int, int> id;
  SharingPattern out{n, std::vector<int>(n * n), 0};
  for (std::size_t e = 0; e < raw.size(); ++e) {
    auto [it, fresh] = id.try_emplace(raw[e], static_cast<int>(id.size()));
    out.orbit_of[e] = it->second;
  }
  out.orbit_count = id.size();
  return out;
}

// Parameter slices of one layer inside the flat vector.
struct LayerLayout {
  std::size_t weights = 0;  // orbit weights, orbit-major, each k x d row-major
  std::size_t edges = 0;    // one per support entry (gc_ew, pt_ew)
  std::size_t bias = 0;     // k per-channel biases
  std::size_t end = 0;
  std::shared_ptr<const EdgeList> support;
};

class Network {
public:
  explicit Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("network: no layers");
    n_ = layers_.front().pattern ? layers_.front().pattern->n : 0;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      const std::string where = "layer " + std::to_string(l + 1) + ": ";
      if (!s.pattern) throw ValidationError(where + "missing sharing pattern");
      if (s.pattern->n != n_ || n_ == 0) throw ValidationError(where + "pattern node count differs");
      if (s.d == 0 || s.k == 0) throw ValidationError(where + "channel counts must be positive");
      if (l > 0 && layers_[l - 1].k != s.d) throw ValidationError(where + "input channels differ from previous output");
      if (needs_graph(s.variant) && !s.graph)
        throw ValidationError(where + std::string(variant_name(s.variant)) + " requires a graph");
      if (!needs_graph(s.variant) && s.graph)
        throw ValidationError(where + std::string(variant_name(s.variant)) + " does not take a graph");
      if (s.graph && s.graph->n() != n_) throw ValidationError(where + "graph node count differs");
      LayerLayout lay;
      lay.weights = offset;
      offset += s.pattern->orbit_count * s.d * s.k;
      lay.edges = offset;
      if (s.variant == Variant::gc_ew || s.variant == Variant::pt_ew) {
        auto support = std::make_shared<EdgeList>();
        const auto& a = s.graph->adjacency();
        for (Eigen::Index i = 0; i < a.rows(); ++i)
          for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) support->emplace_back(static_cast<int>(i), static_cast<int>(j));
        offset += support->size();
        lay.support = std::move(support);
      }
      lay.bias = offset;
      if (s.bias) offset += s.k;
      lay.end = offset;
      layout_.push_back(std::move(lay));
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
  }

  std::size_t n() const { return n_; }
  std::size_t in_channels() const { return layers_.front().d; }
  std::size_t out_channels() const { return layers_.back().k; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<LayerLayout>& layout() const { return layout_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& params() const { return params_; }

  void set_params(Eigen::VectorXd p) {
    if (p.size() != params_.size()) {
      throw ValidationError("network: expected " + std::to_string(params_.size()) + " parameters, got " +
                            std::to_string(p.size()));
    }
    params_ = std::move(p);
  }

  // Orbit weights ~ U(-s, s), s = 1 / sqrt(structural fan-in of a row of the
  // materialized operator). Biases start at 0, gc_ew logits at 0 (uniform
  // softmax), pt_ew edge weights at the adjacency values.
  void initialize(std::uint64_t seed) {
    Philox4x32 rng(seed, 0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      const auto& lay = layout_[l];
      double fan_in = static_cast<double>(n_ * s.d);
      if (s.variant == Variant::pt_ew) {
        fan_in = std::max(1.0, static_cast<double>(lay.support->size()) / static_cast<double>(n_)) *
                 static_cast<double>(s.d);
      }
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
      for (std::size_t i = lay.weights; i < lay.edges; ++i) params_(static_cast<Eigen::Index>(i)) = u(rng);
      for (std::size_t e = 0; e < lay.bias - lay.edges; ++e) {
        const auto [i, j] = (*lay.support)[e];
        params_(static_cast<Eigen::Index>(lay.edges + e)) =
            s.variant == Variant::pt_ew ? s.graph->adjacency()(i, j) : 0.0;
      }
      for (std::size_t i = lay.bias; i < lay.end; ++i) params_(static_cast<Eigen::Index>(i)) = 0.0;
    }
  }

  // Adds the effective Nk x Nd operator of layer l to the tape.
  Tape::Id record_operator(Tape& t, std::size_t l) const {
    const auto& s = layers_[l];
    const auto& lay = layout_[l];
    const Tape::Id op = t.materialize(s.pattern, s.d, s.k, lay.weights);
    switch (s.variant) {
      case Variant::strict:
      case Variant::relax:
        return op;
      case Variant::gc: {
        const auto mix = t.kron_identity(t.constant(s.graph->adjacency()), s.k);
        return t.matmul(mix, op);
      }
      case Variant::gc_ew: {
        const auto logits = t.edge_weights(lay.support, n_, lay.edges);
        const auto mix = t.kron_identity(t.row_softmax(logits, lay.support), s.k);
        return t.matmul(mix, op);
      }
      case Variant::pt_ew: {
        const auto e = t.edge_weights(lay.support, n_, lay.edges);
        return t.hadamard(t.kron_ones(e, s.k, s.d), op);
      }
    }
    throw ValidationError("unknown variant");
  }

  // Columns of `xb` are node-major samples of length N d. Returns the output
  // node id; ReLU between layers, none after the last.
  Tape::Id record_forward(Tape& t, const Eigen::MatrixXd& xb) const {
    check_batch(xb, in_channels(), "input");
    Tape::Id h = t.constant(xb);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      h = t.matmul(record_operator(t, l), h);
      if (layers_[l].bias) h = t.add_bias(h, layers_[l].k, layout_[l].bias);
      if (l + 1 < layers_.size()) h = t.relu(h);
    }
    return h;
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& xb) const {
    Tape t(params_);
    return t.value(record_forward(t, xb));
  }

  // X is N x d (row = node); returns N x k.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != static_cast<Eigen::Index>(n_) || x.cols() != static_cast<Eigen::Index>(in_channels())) {
      throw ValidationError("forward: input is " + std::to_string(x.rows()) + " x " + std::to_string(x.cols()) +
                            ", expected " + std::to_string(n_) + " x " + std::to_string(in_channels()));
    }
    const Eigen::MatrixXd col = to_column(x);
    const Eigen::MatrixXd y = forward_batch(col);
    return from_column(y, out_channels());
  }

  Eigen::MatrixXd layer_operator(std::size_t l) const {
    Tape t(params_);
    return t.value(record_operator(t, l));
  }

  // Node-major vectorization of an N x c matrix and back.
  static Eigen::MatrixXd to_column(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd col(x.size(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index c = 0; c < x.cols(); ++c) col(i * x.cols() + c, 0) = x(i, c);
    return col;
  }

  static Eigen::MatrixXd from_column(const Eigen::MatrixXd& col, std::size_t channels) {
    const auto c = static_cast<Eigen::Index>(channels);
    Eigen::MatrixXd x(col.rows() / c, c);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index a = 0; a < c; ++a) x(i, a) = col(i * c + a, 0);
    return x;
  }

  void check_batch(const Eigen::MatrixXd& b, std::size_t channels, const char* what) const {
    if (b.rows() != static_cast<Eigen::Index>(n_ * channels)) {
      throw ValidationError(std::string(what) + " batch has " + std::to_string(b.rows()) + " rows, expected " +
                            std::to_string(n_ * channels));
    }
  }

private:
  std::vector<LayerSpec> layers_;
  std::vector<LayerLayout> layout_;
  std::size_t n_ = 0;
  Eigen::VectorXd params_;
};

inline double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ValidationError("loss: shape mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

// A recorded forward pass with its loss, ready for reverse accumulation.
struct Recording {
  Tape tape;
  Tape::Id output = 0;
  Tape::Id loss = 0;
};

inline Recording record(const Network& net, const Eigen::MatrixXd& xb, const Eigen::MatrixXd& yb) {
  net.check_batch(yb, net.out_channels(), "target");
  if (xb.cols() != yb.cols()) throw ValidationError("input and target batches differ in size");
  Recording r{Tape(net.params()), 0, 0};
  r.output = net.record_forward(r.tape, xb);
  r.loss = r.tape.mse(r.output, r.tape.constant(yb));
  return r;
}

inline Eigen::VectorXd gradient(const Network& net, const Recording& rec) {
  return rec.tape.backward(rec.loss, net.params());
}

inline Eigen::VectorXd gradient(const Network& net, const Eigen::MatrixXd& xb, const Eigen::MatrixXd& yb) {
  return gradient(net, record(net, xb, yb));
}

enum class Optimizer { sgd, adam };

struct TrainConfig {
  double lr = 0.01;
  std::size_t epochs = 100;
  std::size_t batch = 0;  // 0: full batch
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainResult {
  std::vector<double> loss_trace;  // full-data loss before training, then after each epoch
  std::size_t steps = 0;
};

inline TrainResult train(Network& net, const Eigen::MatrixXd& xb, const Eigen::MatrixXd& yb, const TrainConfig& cfg) {
  net.check_batch(xb, net.in_channels(), "input");
  net.check_batch(yb, net.out_channels(), "target");
  if (xb.cols() != yb.cols() || xb.cols() == 0) throw ValidationError("train: empty or mismatched data");
  if (!(cfg.lr >= 0.0)) throw ValidationError("train: learning rate must be nonnegative");
  const auto count = static_cast<std::size_t>(xb.cols());
  const std::size_t batch = cfg.batch == 0 ? count : std::min(cfg.batch, count);
  TrainResult out;
  out.loss_trace.push_back(loss_mse(net.forward_batch(xb), yb));
  const auto p = static_cast<Eigen::Index>(net.parameter_count());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p), v = Eigen::VectorXd::Zero(p);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::MatrixXd bx, by;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < count) {
      Philox4x32 rng(cfg.seed, epoch);
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t start = 0; start < count; start += batch) {
      const std::size_t len = std::min(batch, count - start);
      if (len == count) {
        bx = xb;
        by = yb;
      } else {
        bx.resize(xb.rows(), static_cast<Eigen::Index>(len));
        by.resize(yb.rows(), static_cast<Eigen::Index>(len));
        for (std::size_t c = 0; c < len; ++c) {
          bx.col(static_cast<Eigen::Index>(c)) = xb.col(static_cast<Eigen::Index>(order[start + c]));
          by.col(static_cast<Eigen::Index>(c)) = yb.col(static_cast<Eigen::Index>(order[start + c]));
        }
      }
      const auto rec = record(net, bx, by);
      const double batch_loss = rec.tape.value(rec.loss)(0, 0);
      if (!std::isfinite(batch_loss)) throw DivergenceError("training diverged (non-finite loss)", out.steps);
      const Eigen::VectorXd g = gradient(net, rec);
      ++out.steps;
      Eigen::VectorXd next = net.params();
      if (cfg.optimizer == Optimizer::sgd) {
        next -= cfg.lr * g;
      } else {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(out.steps));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(out.steps));
        next.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
      }
      if (!next.allFinite()) throw DivergenceError("training diverged (non-finite parameters)", out.steps);
      net.set_params(std::move(next));
    }
    out.loss_trace.push_back(loss_mse(net.forward_batch(xb), yb));
    if (!std::isfinite(out.loss_trace.back())) throw DivergenceError("training diverged (non-finite loss)", out.steps);
  }
  return out;
}

}  // namespace symsel
