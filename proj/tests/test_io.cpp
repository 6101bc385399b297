#include "reflect/io.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace reflect {
namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

TEST(Numbers, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1e300), "1e+300");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(x)), x);
  EXPECT_EQ(number_json(std::numeric_limits<double>::infinity()), Json("inf"));
  EXPECT_EQ(number_json(2.5), Json(2.5));
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
}

TEST(Regions, RoundTrip) {
  const RegionSet base = periodic_slabs(2, 1.0, 0.0, 0.25);
  const std::vector<RegionSet> sets{
      RegionSet::full_space(2),
      RegionSet::empty(3),
      base,
      RegionSet::ball_lattice(2, 1.0, 0.2, {{{0, 0}, (Point(2) << 0.5, 0.5).finished()}, {{1, -1}, (Point(2) << 1.3, -0.4).finished()}}),
      RegionSet::clipped(base, Hyperplane::coordinate(0)),
      RegionSet::clipped_orthant(base),
      RegionSet::reflected(base, Hyperplane::coordinate(1)),
      RegionSet::union_of({base, RegionSet::reflected(base, Hyperplane::coordinate(0))}),
      RegionSet::abs_pullback(base),
  };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const auto& s : sets) {
    const Json j = region_json(s);
    const RegionSet back = region_from_json(Json::parse(j.dump()));
    EXPECT_EQ(region_json(back), j);
    for (int i = 0; i < 200; ++i) {
      Point x(s.dimension());
      for (auto& c : x) c = u(rng);
      EXPECT_EQ(back.contains(x), s.contains(x)) << j.dump();
    }
  }
  EXPECT_THROW(region_json(RegionSet::custom(2, [](const Point&) { return true; }, "p")),
               UnsupportedConfiguration);
}

TEST(Regions, StrictParsing) {
  EXPECT_THROW(region_from_json(Json::parse(R"({"kind":"nope"})")), InvalidArgument);
  EXPECT_THROW(region_from_json(Json::parse(R"({"kind":"full_space","dim":2,"extra":1})")), InvalidArgument);
  EXPECT_ANY_THROW(region_from_json(Json::parse(R"({"kind":"periodic_slabs","dim":2,"period":1})")));
}

TEST(Bounds, CsvUnionOfInputs) {
  BoundResult a{0.5, std::exp(0.5), false, "x", {{"T", 1.0}, {"gamma", 0.25}}};
  BoundResult b{800.0, std::numeric_limits<double>::infinity(), true, "y", {{"T", 2.0}, {"theta", 0.5}}};
  const std::vector<BoundResult> rows{a, b};
  const auto ls = lines(bounds_csv(rows));
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0], "formula_tag,T,gamma,theta,log_value,value_or_inf");
  EXPECT_EQ(ls[1], "x,1,0.25,,0.5," + format_number(std::exp(0.5)));
  EXPECT_EQ(ls[2], "y,2,,0.5,800,inf");
  const Json j = bound_json(b);
  EXPECT_EQ(j["value_or_inf"], "inf");
  EXPECT_EQ(j["inputs"]["theta"], 0.5);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"formula_tag", "inputs", "log_value", "value_or_inf"}));
}

TEST(Systems, SortedTriplets) {
  SparseMatrix m(3, 3);
  std::vector<Eigen::Triplet<double>> t{{2, 0, 1.5}, {0, 2, -1.0}, {1, 1, 4.0}, {0, 0, 0.25}};
  m.setFromTriplets(t.begin(), t.end());
  const auto ls = lines(triplets_csv(m));
  const std::vector<std::string> expect{"row,col,value", "0,0,0.25", "0,2,-1", "1,1,4", "2,0,1.5"};
  EXPECT_EQ(ls, expect);

  const GridDomain g = make_sym_interval(1.0, 4);
  std::vector<char> w{0, 1, 1, 0};
  const DiscreteSystem s = assemble_operator(g, CoefficientField::identity(g), BoundaryCondition::neumann, w);
  const Json h = system_header_json(s);
  EXPECT_EQ(h["shape"], "sym_interval");
  EXPECT_EQ(h["bc"], "neumann");
  EXPECT_EQ(h["omega"], Json::array({1, 2}));
  EXPECT_EQ(h["cells"], 4);
  EXPECT_EQ(h["nnz"], s.H.nonZeros());
}

TEST(Plot, LongFormat) {
  EXPECT_EQ(plot_csv({}), "x,series,y\n");
  const std::vector<PlotPoint> pts{{1.0, "a", 2.0}, {0.5, "b,c", std::numeric_limits<double>::infinity()}};
  EXPECT_EQ(plot_csv(pts), "x,series,y\n1,a,2\n0.5,\"b,c\",inf\n");
}

TEST(Trajectory, Columns) {
  Eigen::VectorXd t(2);
  t << 0.25, 0.75;
  Eigen::MatrixXd v(2, 2);
  v << 1, 2, 3, 4;
  EXPECT_EQ(trajectory_csv(t, v), "t,v0,v1\n0.25,1,3\n0.75,2,4\n");
}

}  // namespace
}  // namespace reflect
