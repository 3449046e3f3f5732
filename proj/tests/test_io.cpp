#include <gtest/gtest.h>

#include <filesystem>

#include "symsel/io.hpp"

namespace symsel {
namespace {

namespace fs = std::filesystem;
using io::json;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "symsel_test_io";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Io, FormatDouble) {
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(io::format_double(-0.0), "0");
  EXPECT_EQ(io::format_double(35.0), "35");
  EXPECT_EQ(io::format_double(std::nan("")), "nan");
  EXPECT_EQ(io::format_double(1e-20), "1e-20");
}

TEST(Io, Rational) {
  EXPECT_EQ(io::parse_rational("3/4"), Rational(3, 4));
  EXPECT_EQ(io::parse_rational("2"), Rational(2));
  EXPECT_EQ(io::parse_rational("6/8"), Rational(3, 4));
  EXPECT_THROW(io::parse_rational("1/0"), ValidationError);
  EXPECT_THROW(io::parse_rational("a/b"), ValidationError);
  EXPECT_THROW(io::parse_rational("1/2x"), ValidationError);
  EXPECT_EQ(io::rational_string(Rational(6, 8)), "3/4");
}

TEST(Io, GraphIsOneIndexed) {
  const auto g = io::graph_from_json(json::parse(R"({"n": 3, "edges": [[1, 3, 0.5], [2, 3]]})"));
  EXPECT_EQ(g.n(), 3u);
  EXPECT_DOUBLE_EQ(g.adjacency()(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(g.adjacency()(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.adjacency()(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(g.adjacency()(0, 1), 0.0);
  const auto back = io::graph_from_json(io::graph_to_json(g));
  EXPECT_EQ(back.adjacency(), g.adjacency());
  EXPECT_EQ(back.node_weights(), g.node_weights());
}

TEST(Io, GraphRejectsBadInput) {
  EXPECT_THROW(io::graph_from_json(json::parse(R"({"n": 3, "edges": [[0, 1]]})")), ValidationError);
  EXPECT_THROW(io::graph_from_json(json::parse(R"({"n": 3, "edges": [[1, 4]]})")), ValidationError);
  EXPECT_THROW(io::graph_from_json(json::parse(R"({"n": 3, "edges": [[1.5, 2]]})")), ValidationError);
  EXPECT_THROW(io::graph_from_json(json::parse(R"({"edges": []})")), ValidationError);
  EXPECT_THROW(io::graph_from_json(json::parse(R"({"n": 2, "edges": [], "node_weights": ["1/2"]})")), ValidationError);
}

TEST(Io, NodeWeights) {
  const auto g = io::graph_from_json(json::parse(R"({"n": 2, "edges": [[1, 2]], "node_weights": ["1/3", "2/3"]})"));
  ASSERT_EQ(g.node_weights().size(), 2u);
  EXPECT_EQ(g.node_weights()[1], Rational(2, 3));
}

TEST(Io, Assignment) {
  const auto a = io::assignment_from_json(json::parse(R"({"cluster_of": [1, 2, 1, 2]})"));
  EXPECT_EQ(a.m(), 2u);
  EXPECT_EQ(a.labels(), (std::vector<int>{0, 1, 0, 1}));
  EXPECT_THROW(io::assignment_from_json(json::parse(R"({"cluster_of": [0, 1]})")), ValidationError);
  EXPECT_THROW(io::assignment_from_json(json::parse(R"({"cluster_of": [1, 3]})")), ValidationError);
}

TEST(Io, GroupRoundTrip) {
  const auto g = full_symmetric_group(4);
  const auto back = io::group_from_json(io::group_to_json(g));
  EXPECT_EQ(back.order(), 24u);
  EXPECT_TRUE(back.is_subgroup_of(g));
  auto j = io::group_to_json(g);
  j["order"] = 12;
  EXPECT_THROW(io::group_from_json(j), ValidationError);
  EXPECT_THROW(io::group_from_json(json::parse(R"({"n": 3, "generators": [[0, 0, 1]]})")), ValidationError);
  EXPECT_THROW(io::group_from_json(json::parse(R"({"n": 3, "generators": [[0, 1]]})")), ValidationError);
  EXPECT_THROW(io::group_from_json(io::group_to_json(g), 10), CapacityError);
}

TEST(Io, LayerPatternRoundTrip) {
  auto p = LayerPattern::zeros(pair_orbits(automorphism_group(Graph::path(4))), 2, 3);
  double v = 0.25;
  for (auto& w : p.weights) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (v += 0.5);
  }
  const auto back = io::layer_pattern_from_json(io::layer_pattern_to_json(p));
  EXPECT_EQ(back.partition.orbit_of, p.partition.orbit_of);
  EXPECT_EQ(materialize(back), materialize(p));
}

TEST(Io, LinearModelDigitsRoundTrip) {
  io::LinearModel m{2, 1, 1, Eigen::MatrixXd(2, 2)};
  m.theta << 0.1, 1.0 / 3.0, -2.0 / 7.0, 1e-17;
  const auto back = io::linear_model_from_json(json::parse(io::linear_model_to_string(m)));
  EXPECT_EQ(back.theta, m.theta);
  EXPECT_THROW(io::linear_model_from_json(json::parse(R"({"n": 3, "theta": [[1, 2]]})")), ValidationError);
}

TEST(Io, AtomicWrite) {
  const auto path = scratch("atomic.txt");
  io::write_file_atomic(path.string(), "first\n");
  io::write_file_atomic(path.string(), "second\n");
  EXPECT_EQ(io::read_file(path.string()), "second\n");
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
  const auto bad = scratch("missing_dir") / "x" / "out.csv";
  EXPECT_THROW(io::write_file_atomic(bad.string(), "x"), ValidationError);
  EXPECT_FALSE(fs::exists(bad));
}

TEST(Io, BadJsonIsValidationError) {
  const auto path = scratch("bad.json");
  io::write_file_atomic(path.string(), "{not json");
  EXPECT_THROW(io::read_json(path.string()), ValidationError);
  EXPECT_THROW(io::read_json(scratch("absent.json").string()), ValidationError);
}

TEST(Io, CsvLayout) {
  io::CsvWriter csv;
  csv.meta("seed", "0");
  csv.header({"a", "b"});
  csv.row_strings({"1", io::format_double(0.5)});
  EXPECT_EQ(csv.str(), "# seed=0\na,b\n1,0.5\n");
}

}  // namespace
}  // namespace symsel
