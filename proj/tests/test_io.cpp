#include <gtest/gtest.h>

#include <cmath>

#include "osgflow/io.hpp"
#include "support/currents.hpp"

using namespace osgflow;

TEST(MeasureCsv, RoundTripsBitExactly) {
  const SignedParticleMeasure mu(2, {{{0.1, 1.0 / 3.0}, -2.5}, {{std::exp(1.0), -1e-300}, 1e-17}});
  const SignedParticleMeasure back = parse_measure_csv(write_measure_csv(mu));
  ASSERT_EQ(back.size(), mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    EXPECT_EQ(back[i].position, mu[i].position);
    EXPECT_EQ(back[i].weight, mu[i].weight);
  }
}

TEST(MeasureCsv, ReportsTheOffendingLine) {
  const std::string text = "x0,weight\n0.5,1\n\n# comment\n0.25,0\n";
  try {
    parse_measure_csv(text, "mu.csv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 5u);
    EXPECT_NE(std::string(e.what()).find("mu.csv:5"), std::string::npos);
  }
  EXPECT_THROW(parse_measure_csv("1,2\n1,nan\n"), FormatError);
  EXPECT_THROW(parse_measure_csv("1,2\n1,2,3\n"), FormatError);
  EXPECT_THROW(parse_measure_csv("x,w\n"), FormatError);
}

TEST(MeasureCsv, KeepsExactWeights) {
  std::vector<ExactMass> exact;
  parse_measure_csv("0,0.1\n1,-3/4\n", "mu", &exact);
  ASSERT_EQ(exact.size(), 2u);
  EXPECT_EQ(exact[0], ExactMass(1, 10));
  EXPECT_EQ(exact[1], ExactMass(-3, 4));
}

TEST(PointsCsv, ParsesRows) {
  const auto pts = parse_points_csv("x,y\n1,2\n3,4\n");
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[1], (Point{3.0, 4.0}));
  EXPECT_THROW(parse_points_csv("1,2\n3\n"), FormatError);
}

TEST(TabulatedFile, ParsesAndInterpolates) {
  const std::string text =
      "dim 1\nhorizon 2\ntime 2 0 2\naxis 3 -1 1\ndata\n"
      "-1\n0\n1\n"
      "-2\n0\n2\n";
  const TabulatedGrid g = parse_tabulated_field(text);
  const VelocityField f = tabulated_field(g);
  EXPECT_DOUBLE_EQ(f(1.0, Point{0.5})[0], 0.75);
  EXPECT_DOUBLE_EQ(f.horizon(), 2.0);
  try {
    parse_tabulated_field("dim 1\nhorizon 2\ntime 2 0 2\naxis 3 -1 1\ndata\n1\n2\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
  EXPECT_THROW(parse_tabulated_field("dim 1\nspeed 3\n"), FormatError);
}

TEST(CurrentFile, RoundTripsBothMassTypes) {
  const auto cur = testing_support::make_current<ExactMass>({{0, 0}, {0.5, 0.25}, {1, 0.5}}, {{0, 1}, {1, 2}},
                                                            {ExactMass(1, 3), ExactMass(2)});
  const std::string text = write_current(cur);
  const auto back = parse_current<ExactMass>(text);
  EXPECT_EQ(back.mass, cur.mass);
  EXPECT_EQ(back.graph.node(2).slice, 2u);
  EXPECT_EQ(write_current(back), text);
  const auto as_float = parse_current<double>("dim 1\nnodes 2\n0 0 0\n1 1 1\nedges 1\n0 1 0.5\n");
  EXPECT_EQ(as_float.mass[0], 0.5);
}

TEST(CurrentFile, ReportsErrors) {
  EXPECT_THROW(parse_current<double>("dim 1\nnodes 2\n0 0 0\n"), FormatError);
  EXPECT_THROW(parse_current<double>("dim 1\nnodes 1\n0 0 0\nedges 1\n0 3 1\n"), FormatError);
  EXPECT_THROW(parse_current<double>("dim 1\nnodes 2\n0 0 0\n1 1 1\nedges 1\n0 1 -1\n"), FormatError);
  try {
    parse_current<double>("dim 1\nnodes 2\n0 0 0\n1 0 0\nedges 1\n0 1 1\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 6u) << "coincident endpoints";
  }
}

TEST(DecompositionFile, ListsPathsAndResidual) {
  const auto cur = testing_support::make_current<ExactMass>(
      {{0, 0}, {1, 0}, {2, 0}, {1, 1}}, {{0, 1}, {1, 2}, {1, 3}, {3, 1}},
      {ExactMass(1, 2), ExactMass(1, 2), ExactMass(1), ExactMass(1)});
  const auto dec = smirnov_decompose(cur);
  EXPECT_EQ(write_decomposition(dec), "paths 1\n1/2 3 0 1 2\nresidual 2\n1 3 1\n3 1 1\n");
}

TEST(FormatDouble, UsesSeventeenDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}
