#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "osgflow/flow.hpp"
#include "osgflow/random.hpp"

using namespace osgflow;

namespace {

// Solution of x' = x (1 - ln x) for 0 < x < 1.
double loglip_exact(double x0, double t) { return std::exp(1.0 - (1.0 - std::log(x0)) * std::exp(-t)); }

}  // namespace

TEST(IntegrateFlow, LogLipschitzAnalyticSolution) {
  const BuiltinField b = make_builtin("radial_loglip", 1);
  // Every start stays inside (0, 1), where the closed form applies.
  for (double x0 : {std::exp(-3.0), 1e-6, 0.1}) {
    for (double t : {0.1, std::numbers::ln2, 1.0}) {
      const FlowResult r = integrate_flow(b.field, b.certificate, 0.0, t, Point{x0});
      ASSERT_LT(loglip_exact(x0, t), 1.0);
      EXPECT_NEAR(r.point[0], loglip_exact(x0, t), 1e-9) << x0 << " " << t;
      EXPECT_GT(r.certified_radius, 0.0);
    }
  }
}

TEST(IntegrateFlow, RotationPeriodReturnsHome) {
  const BuiltinField b = make_builtin("rotation");
  const FlowResult r = integrate_flow(b.field, b.certificate, 0.0, 2.0 * std::numbers::pi, Point{1.0, 0.0});
  EXPECT_NEAR(r.point[0], 1.0, 1e-8);
  EXPECT_NEAR(r.point[1], 0.0, 1e-8);
  const FlowResult half = integrate_flow(b.field, b.certificate, 0.0, std::numbers::pi / 2.0, Point{1.0, 0.0});
  EXPECT_NEAR(half.point[0], 0.0, 1e-9);
  EXPECT_NEAR(half.point[1], 1.0, 1e-9);
}

TEST(IntegrateFlow, ConstantFieldAndTrivialSpan) {
  const BuiltinField b = make_builtin("constant", 2, 2.0, {0.5, -1.0});
  const FlowResult r = integrate_flow(b.field, b.certificate, 0.5, 1.5, Point{0.0, 0.0});
  EXPECT_NEAR(r.point[0], 0.5, 1e-14);
  EXPECT_NEAR(r.point[1], -1.0, 1e-14);
  const FlowResult same = integrate_flow(b.field, b.certificate, 1.0, 1.0, Point{3.0, 4.0});
  EXPECT_EQ(same.point, (Point{3.0, 4.0}));
  EXPECT_EQ(same.steps_taken, 0u);
}

TEST(IntegrateFlow, BackwardFlowIsTheInverse) {
  const BuiltinField b = make_builtin("radial_loglip", 2);
  const Point x{0.2, -0.1};
  const FlowResult fwd = integrate_flow(b.field, b.certificate, 0.2, 0.9, x);
  const FlowResult back = integrate_flow(b.field, b.certificate, 0.9, 0.2, fwd.point);
  EXPECT_NEAR(distance(back.point, x), 0.0, 1e-9);
}

TEST(IntegrateFlow, NonSmoothFieldUsesFixedSteps) {
  const BuiltinField b = make_builtin("sign");
  StepController ctrl;
  ctrl.fixed_step = 0.01;
  const FlowResult r = integrate_flow(b.field, b.certificate, 0.0, 0.3, Point{0.5}, ctrl);
  EXPECT_NEAR(r.point[0], 0.8, 1e-14);
  EXPECT_EQ(r.steps_taken, 30u);
}

TEST(IntegrateFlow, RejectsBadInputs) {
  const BuiltinField b = make_builtin("rotation");
  EXPECT_THROW(integrate_flow(b.field, b.certificate, 0.0, 100.0, Point{1.0, 0.0}), std::domain_error);
  EXPECT_THROW(integrate_flow(b.field, b.certificate, 0.0, 1.0, Point{1.0}), std::invalid_argument);
  const VelocityField nan_field("nan", 1, 1.0, [](double, std::span<const double>, std::span<double> v) {
    v[0] = std::numeric_limits<double>::quiet_NaN();
  });
  try {
    integrate_flow(nan_field, b.certificate, 0.0, 1.0, Point{0.0});
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_LT(e.time_reached(), 1.0);
  }
}

TEST(IntegrateFlow, FixedStepOrderIsFive) {
  // Fixed steps on a smooth field: halving h divides the error by about 2^5.
  const VelocityField rot("rot", 2, 10.0,
                          [](double, std::span<const double> x, std::span<double> v) {
                            v[0] = -x[1];
                            v[1] = x[0];
                          },
                          false);
  OsgoodCertificate cert{Modulus::linear(), PiecewiseConstant::constant(1.0, 10.0), PiecewiseConstant::constant(1.0, 10.0)};
  double prev = 0.0;
  for (double h : {0.2, 0.1, 0.05}) {
    StepController ctrl;
    ctrl.fixed_step = h;
    const FlowResult r = integrate_flow(rot, cert, 0.0, 2.0, Point{1.0, 0.0}, ctrl);
    const double err = std::hypot(r.point[0] - std::cos(2.0), r.point[1] - std::sin(2.0));
    if (prev > 0.0) {
      EXPECT_GT(prev / err, 24.0);
      EXPECT_LT(prev / err, 40.0);
    }
    prev = err;
  }
}

TEST(FlowResiduals, SemigroupAndInverseAreSmall) {
  SplitMix64 rng(11);
  for (const char* name : {"rotation", "radial_loglip"}) {
    const BuiltinField b = make_builtin(name, 2);
    const double T = b.field.horizon();
    for (int k = 0; k < 20; ++k) {
      const double t1 = rng.uniform(0.0, T), t2 = rng.uniform(0.0, T), t3 = rng.uniform(0.0, T);
      const Point x = rng.in_ball(2, 0.9);
      EXPECT_LE(semigroup_residual(b.field, b.certificate, t1, t2, t3, x), 1e-7) << name;
      EXPECT_LE(inverse_residual(b.field, b.certificate, t1, t2, x), 1e-7) << name;
    }
  }
}

TEST(CurveConformance, ExactCurveSitsOnTheFlow) {
  const BuiltinField b = make_builtin("rotation");
  SpaceTimeCurve c;
  c.lipschitz = 2.0;
  for (int k = 0; k <= 100; ++k) {
    const double s = 0.01 * k;
    c.param.push_back(s);
    c.time.push_back(s);
    c.position.push_back({std::cos(s), std::sin(s)});
  }
  const ConformanceReport r = curve_conformance(c, b.field, b.certificate);
  EXPECT_LT(r.max_deviation, 1e-9);
  EXPECT_TRUE(r.within_envelope);
  EXPECT_NEAR(r.budget, 1.0, 1e-12);
}

TEST(CurveConformance, PerturbedCurveStaysInsideTheEnvelope) {
  const BuiltinField b = make_builtin("rotation");
  SpaceTimeCurve c;
  c.lipschitz = 3.0;
  for (int k = 0; k <= 200; ++k) {
    const double s = 0.005 * k;
    c.param.push_back(s);
    c.time.push_back(s);
    const double wobble = 1e-4 * std::sin(40.0 * s);
    c.position.push_back({(1.0 + wobble) * std::cos(s), (1.0 + wobble) * std::sin(s)});
  }
  const ConformanceReport r = curve_conformance(c, b.field, b.certificate);
  EXPECT_GT(r.max_deviation, 1e-6);
  EXPECT_TRUE(r.within_envelope);
  EXPECT_LE(r.max_deviation, r.envelope_bound);
}

TEST(CurveConformance, RejectsNonLipschitzCurves) {
  SpaceTimeCurve c;
  c.lipschitz = 1.0;
  c.param = {0.0, 0.1};
  c.time = {0.0, 0.1};
  c.position = {{0.0, 0.0}, {1.0, 0.0}};
  const BuiltinField b = make_builtin("rotation");
  EXPECT_THROW(curve_conformance(c, b.field, b.certificate), std::invalid_argument);
}
