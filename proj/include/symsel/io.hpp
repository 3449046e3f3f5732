#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "symsel/equivmap.hpp"
#include "symsel/error.hpp"
#include "symsel/gnet.hpp"
#include "symsel/graph.hpp"
#include "symsel/perm.hpp"

namespace symsel::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Writes to a sibling temporary file and renames it into place, so a failed
// run never leaves a partial file behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw ValidationError("write to '" + path + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot move output into '" + path + "': " + ec.message());
  }
}

// 12 significant digits, '.' decimal point regardless of locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  std::string s(buf);
  for (auto& c : s)
    if (c == ',') c = '.';
  if (s == "-0") s = "0";
  return s;
}

// Round-trip precision for parameter files.
inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  void meta(const std::string& key, const std::string& value) { out_ << "# " << key << '=' << value << '\n'; }

  void header(const std::vector<std::string>& cols) { row_strings(cols); }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;
};

inline Rational parse_rational(const std::string& s) {
  try {
    const auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return Rational(v);
    }
    const long long p = std::stoll(s.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument(s);
    const std::string qs = s.substr(slash + 1);
    const long long q = std::stoll(qs, &used);
    if (used != qs.size() || q == 0) throw std::invalid_argument(s);
    return Rational(p, q);
  } catch (const std::logic_error&) {
    throw ValidationError("'" + s + "' is not a rational of the form p/q");
  }
}

inline std::string rational_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

template <class T>
T get_field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(what + ": field '" + key + "' has the wrong type");
  }
}

// {"n": int, "edges": [[i, j] or [i, j, w]], "node_weights": ["p/q", ...]}, 1-indexed.
inline Graph graph_from_json(const json& j) {
  const auto n = get_field<std::size_t>(j, "n", "graph");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto edges = get_field<std::vector<std::vector<double>>>(j, "edges", "graph");
  for (const auto& e : edges) {
    if (e.size() != 2 && e.size() != 3) throw ValidationError("graph: each edge is [i, j] or [i, j, w]");
    const auto i = static_cast<long long>(e[0]), jj = static_cast<long long>(e[1]);
    if (static_cast<double>(i) != e[0] || static_cast<double>(jj) != e[1] || i < 1 || jj < 1 ||
        i > static_cast<long long>(n) || jj > static_cast<long long>(n)) {
      throw ValidationError("graph: edge endpoints must be integers in 1.." + std::to_string(n));
    }
    const double w = e.size() == 3 ? e[2] : 1.0;
    a(i - 1, jj - 1) = w;
    a(jj - 1, i - 1) = w;
  }
  std::vector<Rational> weights;
  if (j.contains("node_weights")) {
    for (const auto& s : get_field<std::vector<std::string>>(j, "node_weights", "graph")) weights.push_back(parse_rational(s));
  }
  return Graph(std::move(a), std::move(weights));
}

inline json graph_to_json(const Graph& g) {
  json edges = json::array();
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t jj = i; jj < g.n(); ++jj) {
      const double w = g.adjacency()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj));
      if (w != 0.0) edges.push_back({i + 1, jj + 1, w});
    }
  json weights = json::array();
  for (const auto& w : g.node_weights()) weights.push_back(rational_string(w));
  return json{{"n", g.n()}, {"edges", edges}, {"node_weights", weights}};
}

// {"cluster_of": [int]}; entry i is the 1-indexed cluster of node i + 1.
inline ClusterAssignment assignment_from_json(const json& j) {
  const auto labels = get_field<std::vector<long long>>(j, "cluster_of", "assignment");
  std::vector<int> zero_based;
  long long m = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1) throw ValidationError("assignment: node " + std::to_string(i + 1) + " has cluster label < 1");
    m = std::max(m, labels[i]);
    zero_based.push_back(static_cast<int>(labels[i] - 1));
  }
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  for (int c : zero_based) used[static_cast<std::size_t>(c)] = 1;
  for (std::size_t c = 0; c < used.size(); ++c)
    if (!used[c]) throw ValidationError("assignment: cluster " + std::to_string(c + 1) + " has no nodes");
  return ClusterAssignment(std::move(zero_based), static_cast<std::size_t>(m));
}

inline json coarse_graph_to_json(const CoarseGraph& gc) {
  json edges = json::array();
  for (std::size_t i = 0; i < gc.m(); ++i)
    for (std::size_t jj = i; jj < gc.m(); ++jj) {
      const double w = gc.adjacency()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj));
      if (w != 0.0) edges.push_back({i + 1, jj + 1, w});
    }
  json weights = json::array();
  for (const auto& w : gc.node_weights()) weights.push_back(rational_string(w));
  return json{{"m", gc.m()}, {"counts", gc.counts()}, {"edges", edges}, {"node_weights", weights}};
}

inline json permutation_to_json(const Permutation& p) { return json(p.images()); }

inline Permutation permutation_from_json(const json& j, std::size_t n) {
  std::vector<int> img;
  try {
    img = j.get<std::vector<int>>();
  } catch (const json::exception&) {
    throw ValidationError("permutation must be an array of 0-based images");
  }
  if (img.size() != n) throw ValidationError("permutation has " + std::to_string(img.size()) + " images, expected " + std::to_string(n));
  return Permutation(std::move(img));
}

inline json group_to_json(const PermGroup& g) {
  json gens = json::array();
  for (const auto& p : g.generators()) gens.push_back(permutation_to_json(p));
  return json{{"n", g.n()}, {"generators", gens}, {"order", g.order()}};
}

// Closes the listed generators; a stated "order" must match the closure.
inline PermGroup group_from_json(const json& j, std::size_t cap = kDefaultElementCap) {
  const auto n = get_field<std::size_t>(j, "n", "group");
  std::vector<Permutation> gens;
  for (const auto& g : get_field<json>(j, "generators", "group")) gens.push_back(permutation_from_json(g, n));
  auto group = close(n, gens, cap, "file");
  if (j.contains("order") && get_field<std::size_t>(j, "order", "group") != group.order()) {
    throw ValidationError("group: stated order " + std::to_string(j.at("order").get<std::size_t>()) +
                          " differs from closure order " + std::to_string(group.order()));
  }
  return group;
}

inline json layer_pattern_to_json(const LayerPattern& p) {
  json orbit = json::array();
  for (std::size_t i = 0; i < p.partition.n; ++i) {
    json row = json::array();
    for (std::size_t jj = 0; jj < p.partition.n; ++jj) row.push_back(p.partition.at(i, jj));
    orbit.push_back(row);
  }
  json weights = json::array();
  for (const auto& w : p.weights) {
    json block = json::array();
    for (Eigen::Index a = 0; a < w.rows(); ++a) {
      json r = json::array();
      for (Eigen::Index b = 0; b < w.cols(); ++b) r.push_back(w(a, b));
      block.push_back(r);
    }
    weights.push_back(block);
  }
  return json{{"orbit_of", orbit}, {"weights", weights}};
}

inline LayerPattern layer_pattern_from_json(const json& j) {
  const auto orbit = get_field<std::vector<std::vector<int>>>(j, "orbit_of", "layer pattern");
  const auto weights = get_field<std::vector<std::vector<std::vector<double>>>>(j, "weights", "layer pattern");
  const std::size_t n = orbit.size();
  SharingPattern part{n, {}, 0};
  int mx = -1;
  for (const auto& row : orbit) {
    if (row.size() != n) throw ValidationError("layer pattern: orbit_of must be square");
    for (int o : row) {
      if (o < 0) throw ValidationError("layer pattern: negative orbit id");
      mx = std::max(mx, o);
      part.orbit_of.push_back(o);
    }
  }
  part.orbit_count = static_cast<std::size_t>(mx + 1);
  if (weights.size() != part.orbit_count) throw ValidationError("layer pattern: one weight block per orbit required");
  const std::size_t k = weights.empty() ? 1 : weights[0].size();
  const std::size_t d = weights.empty() || weights[0].empty() ? 1 : weights[0][0].size();
  LayerPattern p = LayerPattern::zeros(std::move(part), d, k);
  for (std::size_t o = 0; o < weights.size(); ++o) {
    if (weights[o].size() != k) throw ValidationError("layer pattern: ragged weight blocks");
    for (std::size_t a = 0; a < k; ++a) {
      if (weights[o][a].size() != d) throw ValidationError("layer pattern: ragged weight blocks");
      for (std::size_t b = 0; b < d; ++b)
        p.weights[o](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = weights[o][a][b];
    }
  }
  return p;
}

inline json block_form_to_json(const BlockFormPattern& bf) {
  json ties = json::array();
  for (auto [x, y] : bf.ties()) ties.push_back({x, y});
  return json{{"m", bf.m()},
              {"scalar_count", bf.scalar_count()},
              {"free_scalar_count", bf.free_scalar_count()},
              {"ties", ties}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  std::vector<std::vector<double>> rows;
  try {
    rows = j.get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    throw ValidationError(what + ": expected an array of numeric rows");
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) throw ValidationError(what + ": ragged rows");
    for (Eigen::Index jj = 0; jj < c; ++jj) m(i, jj) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)];
  }
  return m;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index jj = 0; jj < m.cols(); ++jj) r.push_back(m(i, jj));
    rows.push_back(r);
  }
  return rows;
}

// Linear model file: {"n": N, "d": d, "k": k, "theta": Nd x Nk rows}.
struct LinearModel {
  std::size_t n = 0, d = 1, k = 1;
  Eigen::MatrixXd theta;
};

inline LinearModel linear_model_from_json(const json& j) {
  LinearModel m;
  m.n = get_field<std::size_t>(j, "n", "linear model");
  m.d = j.contains("d") ? get_field<std::size_t>(j, "d", "linear model") : 1;
  m.k = j.contains("k") ? get_field<std::size_t>(j, "k", "linear model") : 1;
  m.theta = matrix_from_json(get_field<json>(j, "theta", "linear model"), "linear model theta");
  detail::check_theta_shape(m.theta, m.n, m.d, m.k);
  return m;
}

// Linear model with round-trip-exact numbers (serialized by hand so that the
// digits do not depend on the JSON library's float printer).
inline std::string linear_model_to_string(const LinearModel& m) {
  std::ostringstream out;
  out << "{\n  \"n\": " << m.n << ",\n  \"d\": " << m.d << ",\n  \"k\": " << m.k << ",\n  \"theta\": [\n";
  for (Eigen::Index i = 0; i < m.theta.rows(); ++i) {
    out << "    [";
    for (Eigen::Index jj = 0; jj < m.theta.cols(); ++jj) out << (jj ? ", " : "") << format_exact(m.theta(i, jj));
    out << "]" << (i + 1 < m.theta.rows() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
  return out.str();
}

// Trained network: per-layer descriptors plus the flat weight vector.
inline json network_to_json(const Network& net) {
  json layers = json::array();
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& s = net.layers()[l];
    const auto& lay = net.layout()[l];
    layers.push_back({{"variant", std::string(variant_name(s.variant))},
                      {"d", s.d},
                      {"k", s.k},
                      {"bias", s.bias},
                      {"orbit_count", s.pattern->orbit_count},
                      {"orbit_of", s.pattern->orbit_of},
                      {"offsets", {{"weights", lay.weights}, {"edges", lay.edges}, {"bias", lay.bias}, {"end", lay.end}}}});
  }
  std::vector<double> w(net.params().data(), net.params().data() + net.params().size());
  return json{{"n", net.n()}, {"layers", layers}, {"weights", w}};
}

}  // namespace symsel::io
