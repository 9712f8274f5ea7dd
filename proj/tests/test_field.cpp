#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "osgflow/field.hpp"

using namespace osgflow;

TEST(PiecewiseConstant, IntegratesExactly) {
  const PiecewiseConstant p({0.0, 1.0, 3.0}, {2.0, 0.5});
  EXPECT_DOUBLE_EQ(p(0.5), 2.0);
  EXPECT_DOUBLE_EQ(p(2.0), 0.5);
  EXPECT_DOUBLE_EQ(p.integral(0.0, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(p.integral(0.5, 2.0), 1.5);
  EXPECT_DOUBLE_EQ(p.integral(2.0, 0.5), 1.5);
  EXPECT_THROW(PiecewiseConstant({0.0, 1.0}, {-1.0}), std::invalid_argument);
  EXPECT_THROW(PiecewiseConstant({0.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(BuiltinFields, EvaluateToKnownValues) {
  const VelocityField rot = rotation_field();
  const Point v = rot(0.0, Point{0.3, -0.4});
  EXPECT_DOUBLE_EQ(v[0], 0.4);
  EXPECT_DOUBLE_EQ(v[1], 0.3);
  const VelocityField rad = radial_loglip_field(2);
  const Point w = rad(0.0, Point{0.0, std::exp(-2.0)});
  EXPECT_NEAR(w[1], 3.0 * std::exp(-2.0), 1e-16);
  EXPECT_EQ(rad(0.0, Point{0.0, 0.0})[0], 0.0);
  EXPECT_DOUBLE_EQ(rad(0.0, Point{2.0, 0.0})[0], 2.0);
  const VelocityField sgn = sign_field();
  EXPECT_EQ(sgn(0.0, Point{-0.1})[0], -1.0);
  EXPECT_EQ(sgn(0.0, Point{0.0})[0], 0.0);
  EXPECT_FALSE(sgn.smooth());
  EXPECT_THROW(make_builtin("vortex"), std::invalid_argument);
}

TEST(CheckOsgood, AcceptsDeclaredCertificates) {
  for (const auto& [name, dim] : {std::pair<std::string, std::size_t>{"rotation", 2}, {"radial_loglip", 2},
                                  {"radial_loglip", 1}, {"radial_loglip", 3}}) {
    const BuiltinField b = make_builtin(name, dim);
    PairSampler sampler(dim, b.field.horizon(), b.bound_radius, 1e-6, 0.5, 42);
    const ViolationReport r = check_osgood(b.field, b.certificate, sampler, 4000);
    EXPECT_LE(r.worst_ratio, 1.0) << name << " d=" << dim;
    EXPECT_EQ(r.samples_checked, 4000u);
    PairSampler sb(dim, b.field.horizon(), b.bound_radius, 1e-6, 0.5, 43);
    EXPECT_LE(check_bound(b.field, b.certificate, sb, 4000).worst_ratio, 1.0 + 1e-12) << name;
  }
}

TEST(CheckOsgood, RadialCertificateIsNearlySharp) {
  // Pairs straddling the origin come within a factor of about 2 of the declared C.
  const BuiltinField b = make_builtin("radial_loglip", 1);
  PairSampler sampler(1, 1.0, 1e-3, 1e-6, 1e-3, 5);
  EXPECT_GT(check_osgood(b.field, b.certificate, sampler, 20000).worst_ratio, 0.4);
}

TEST(CheckOsgood, SignFieldFailsWithWitness) {
  const BuiltinField b = make_builtin("sign");
  EXPECT_FALSE(b.osgood_holds);
  PairSampler sampler(1, 1.0, 0.5, 1e-6, 0.5, 3);
  const ViolationReport r = check_osgood(b.field, b.certificate, sampler, 2000);
  EXPECT_GT(r.worst_ratio, 1.0);
  ASSERT_EQ(r.witness_x.size(), 1u);
  EXPECT_LT(r.witness_x[0] * r.witness_y[0], 0.0) << "witness straddles the jump";
}

TEST(CheckOsgood, IsDeterministicPerSeed) {
  const BuiltinField b = make_builtin("radial_loglip", 2);
  PairSampler s1(2, 1.0, 1.0, 1e-6, 0.5, 9), s2(2, 1.0, 1.0, 1e-6, 0.5, 9);
  const auto r1 = check_osgood(b.field, b.certificate, s1, 500);
  const auto r2 = check_osgood(b.field, b.certificate, s2, 500);
  EXPECT_EQ(r1.worst_ratio, r2.worst_ratio);
  EXPECT_EQ(r1.witness_x, r2.witness_x);
}

TEST(TabulatedField, ReproducesAffineFieldsExactly) {
  // V(t, x, y) = (1 + t - 2x + y, 3y), sampled on a coarse grid.
  TabulatedGrid g;
  g.dim = 2;
  g.horizon = 1.0;
  g.time = {3, 0.0, 1.0};
  g.space = {{4, -1.0, 1.0}, {5, -2.0, 2.0}};
  for (std::size_t it = 0; it < 3; ++it) {
    for (std::size_t ix = 0; ix < 4; ++ix) {
      for (std::size_t iy = 0; iy < 5; ++iy) {
        const double t = 0.5 * static_cast<double>(it), x = -1.0 + 2.0 * static_cast<double>(ix) / 3.0,
                     y = -2.0 + static_cast<double>(iy);
        g.data.push_back(1.0 + t - 2.0 * x + y);
        g.data.push_back(3.0 * y);
      }
    }
  }
  const VelocityField f = tabulated_field(g);
  for (const auto& [t, x, y] : {std::tuple{0.1, 0.3, -1.7}, {0.77, -0.9, 1.2}, {1.0, 1.0, 2.0}}) {
    const Point v = f(t, Point{x, y});
    EXPECT_NEAR(v[0], 1.0 + t - 2.0 * x + y, 1e-13);
    EXPECT_NEAR(v[1], 3.0 * y, 1e-13);
  }
  // Clamped outside the grid.
  EXPECT_NEAR(f(0.0, Point{5.0, 0.0})[0], 1.0 - 2.0, 1e-13);
  g.data.pop_back();
  EXPECT_THROW(tabulated_field(g), std::invalid_argument);
}

TEST(BallStencil, IsANormalizedSymmetricRule) {
  for (std::size_t d : {1u, 2u, 3u}) {
    const BallStencil st = ball_stencil(d);
    double total = 0.0;
    Point first(d, 0.0);
    for (std::size_t k = 0; k < st.offsets.size(); ++k) {
      total += st.weights[k];
      EXPECT_LE(norm(st.offsets[k]), 1.0 + 1e-12);
      for (std::size_t i = 0; i < d; ++i) first[i] += st.weights[k] * st.offsets[k][i];
    }
    EXPECT_NEAR(total, 1.0, 1e-14) << d;
    for (double m : first) EXPECT_NEAR(m, 0.0, 1e-14) << d;
  }
}

TEST(Mollify, PreservesAffineFields) {
  const VelocityField rot = rotation_field();
  const VelocityField m = mollify(rot, 0.3, ball_stencil(2));
  const Point v = m(0.0, Point{0.2, 0.7});
  EXPECT_NEAR(v[0], -0.7, 1e-14);
  EXPECT_NEAR(v[1], 0.2, 1e-14);
}

TEST(Mollify, SmoothsTheSignFieldSymmetrically) {
  const VelocityField m = mollify(sign_field(), 0.1, ball_stencil(1));
  EXPECT_NEAR(m(0.0, Point{0.0})[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(m(0.0, Point{0.5})[0], 1.0);
  EXPECT_DOUBLE_EQ(m(0.0, Point{-0.2})[0], -1.0);
  const double inner = m(0.0, Point{0.05})[0];
  EXPECT_GT(inner, 0.0);
  EXPECT_LT(inner, 1.0);
  EXPECT_THROW(mollify(sign_field(), 0.1, ball_stencil(2)), std::invalid_argument);
  EXPECT_THROW(mollify(sign_field(), 0.0, ball_stencil(1)), std::invalid_argument);
}
