#pragma once

// Characteristic flow X(s, t, x) of dx/dtau = V(tau, x) by an embedded
// Dormand-Prince 5(4) pair, with Osgood-envelope certified radii.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "osgflow/field.hpp"
#include "osgflow/modulus.hpp"

namespace osgflow {

struct StepController {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 selects a starting step automatically
  double max_step = kInfinity;
  double fixed_step = 1e-3;  // used for non-smooth fields
  std::size_t max_steps = 10'000'000;
  double safety = 0.9;
  double beta = 0.04;  // PI gain on the previous error
};

struct FlowResult {
  Point point;
  std::size_t steps_taken = 0;
  std::size_t steps_rejected = 0;
  double local_error_estimate = 0.0;
  double certified_radius = 0.0;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, FlowResult partial, double time_reached)
      : std::runtime_error(what), partial_(std::move(partial)), time_reached_(time_reached) {}

  const FlowResult& partial() const noexcept { return partial_; }
  double time_reached() const noexcept { return time_reached_; }

 private:
  FlowResult partial_;
  double time_reached_;
};

/// Upper Osgood envelope of an accumulated perturbation over int_[s,t] C.
inline double certified_radius(const OsgoodCertificate& cert, double perturbation, double s, double t) {
  if (!(perturbation > 0.0)) return 0.0;
  if (perturbation >= 1.0) return 1.0;
  return separation_envelope(cert.modulus, perturbation, cert.C.integral(s, t)).upper;
}

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  // Difference between the 5th and embedded 4th order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

class Stepper {
 public:
  Stepper(const VelocityField& field, double s, double dir)
      : field_(field), s_(s), dir_(dir), d_(field.dim()), k_(7, Point(d_)), tmp_(d_) {}

  // Reparametrized right-hand side y' = dir * V(s + dir * sigma, y).
  void rhs(double sigma, std::span<const double> y, std::span<double> out) const {
    field_.eval(s_ + dir_ * sigma, y, out);
    if (dir_ < 0.0) {
      for (double& v : out) v = -v;
    }
  }

  void prime(double sigma, std::span<const double> y) { rhs(sigma, y, k_[0]); }

  // One trial step from (sigma, y); writes the 5th order update and the error vector.
  void step(double sigma, std::span<const double> y, double h, Point& y_new, Point& err) {
    using T = Dopri5;
    auto stage = [&](std::size_t i, std::initializer_list<std::pair<std::size_t, double>> terms) {
      for (std::size_t j = 0; j < d_; ++j) {
        double acc = y[j];
        for (const auto& [k, a] : terms) acc += h * a * k_[k][j];
        tmp_[j] = acc;
      }
      rhs(sigma + T::c[i] * h, tmp_, k_[i]);
    };
    stage(1, {{0, T::a21}});
    stage(2, {{0, T::a31}, {1, T::a32}});
    stage(3, {{0, T::a41}, {1, T::a42}, {2, T::a43}});
    stage(4, {{0, T::a51}, {1, T::a52}, {2, T::a53}, {3, T::a54}});
    stage(5, {{0, T::a61}, {1, T::a62}, {2, T::a63}, {3, T::a64}, {4, T::a65}});
    for (std::size_t j = 0; j < d_; ++j) {
      y_new[j] = y[j] + h * (T::a71 * k_[0][j] + T::a73 * k_[2][j] + T::a74 * k_[3][j] + T::a75 * k_[4][j] +
                             T::a76 * k_[5][j]);
    }
    rhs(sigma + h, y_new, k_[6]);
    for (std::size_t j = 0; j < d_; ++j) {
      err[j] = h * (T::e1 * k_[0][j] + T::e3 * k_[2][j] + T::e4 * k_[3][j] + T::e5 * k_[4][j] + T::e6 * k_[5][j] +
                    T::e7 * k_[6][j]);
    }
  }

  // First-same-as-last: the last stage of an accepted step starts the next.
  void accept() { std::swap(k_[0], k_[6]); }

  const Point& slope() const { return k_[0]; }

 private:
  const VelocityField& field_;
  double s_;
  double dir_;
  std::size_t d_;
  std::vector<Point> k_;
  Point tmp_;
};

inline double scaled_rms(std::span<const double> e, std::span<const double> y0, std::span<const double> y1,
                         const StepController& ctrl) {
  double acc = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    const double sc = ctrl.atol + ctrl.rtol * std::max(std::abs(y0[j]), std::abs(y1[j]));
    acc += (e[j] / sc) * (e[j] / sc);
  }
  return std::sqrt(acc / static_cast<double>(e.size()));
}

inline void check_time(const VelocityField& field, double t, const char* which) {
  const double slack = 1e-12 * field.horizon();
  if (!(t >= -slack && t <= field.horizon() + slack)) {
    throw std::domain_error(std::string("flow time ") + which + " outside [0, T]");
  }
}

}  // namespace detail

/// X(s, t, x). Reverse time (t < s) integrates the reversed field.
inline FlowResult integrate_flow(const VelocityField& field, const OsgoodCertificate& cert, double s, double t,
                                 std::span<const double> x, const StepController& ctrl = {}) {
  if (x.size() != field.dim()) throw std::invalid_argument("initial point has the wrong dimension");
  detail::check_time(field, s, "s");
  detail::check_time(field, t, "t");
  FlowResult res;
  res.point.assign(x.begin(), x.end());
  if (s == t) return res;

  const double dir = t > s ? 1.0 : -1.0;
  const double span = std::abs(t - s);
  const double floor = 1e-14 * field.horizon();
  detail::Stepper stepper(field, s, dir);
  Point y = res.point, y_new(field.dim()), err(field.dim());
  stepper.prime(0.0, y);

  auto fail = [&](const std::string& why, double sigma) {
    res.point = y;
    res.certified_radius = certified_radius(cert, res.local_error_estimate, s, s + dir * sigma);
    throw IntegrationError(why, res, s + dir * sigma);
  };

  double sigma = 0.0;
  if (!field.smooth()) {
    const auto n = static_cast<std::size_t>(std::ceil(span / ctrl.fixed_step - 1e-9));
    const double h = span / static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) {
      stepper.step(sigma, y, h, y_new, err);
      stepper.accept();
      y.swap(y_new);
      sigma = i + 1 == n ? span : sigma + h;
      res.local_error_estimate += norm(err);
      ++res.steps_taken;
    }
  } else {
    double h = ctrl.initial_step;
    if (!(h > 0.0)) {
      // Hairer-Wanner style guess from the scaled size of y and y'.
      double d0 = 0.0, d1 = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double sc = ctrl.atol + ctrl.rtol * std::abs(y[j]);
        d0 += (y[j] / sc) * (y[j] / sc);
        d1 += (stepper.slope()[j] / sc) * (stepper.slope()[j] / sc);
      }
      d0 = std::sqrt(d0 / static_cast<double>(y.size()));
      d1 = std::sqrt(d1 / static_cast<double>(y.size()));
      h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
      // A tiny |y| must not pin the first step near the underflow floor.
      h = std::clamp(h, 1e-6 * span, span);
    }
    h = std::min(h, ctrl.max_step);
    double err_prev = 1e-4;
    bool rejected_last = false;
    while (sigma < span) {
      if (res.steps_taken + res.steps_rejected >= ctrl.max_steps) fail("step budget exhausted", sigma);
      if (h < floor) fail("step size underflow", sigma);
      const bool last = sigma + h >= span * (1.0 - 1e-15);
      if (last) h = span - sigma;
      stepper.step(sigma, y, h, y_new, err);
      const double e = detail::scaled_rms(err, y, y_new, ctrl);
      if (!std::isfinite(e)) {
        h *= 0.2;
        ++res.steps_rejected;
        rejected_last = true;
        continue;
      }
      if (e <= 1.0) {
        sigma = last ? span : sigma + h;
        y.swap(y_new);
        stepper.accept();
        res.local_error_estimate += norm(err);
        ++res.steps_taken;
        const double alpha = 0.2 - 0.75 * ctrl.beta;
        double factor = e == 0.0 ? 10.0 : ctrl.safety * std::pow(e, -alpha) * std::pow(err_prev, ctrl.beta);
        factor = std::clamp(factor, 0.2, rejected_last ? 1.0 : 10.0);
        err_prev = std::max(e, 1e-4);
        h = std::min(h * factor, ctrl.max_step);
        rejected_last = false;
      } else {
        h *= std::max(0.2, ctrl.safety * std::pow(e, -0.2));
        ++res.steps_rejected;
        rejected_last = true;
      }
    }
  }
  res.point = y;
  res.certified_radius = certified_radius(cert, res.local_error_estimate, s, t);
  return res;
}

/// |X(t3, t2, X(t1, t3, x)) - X(t1, t2, x)|.
inline double semigroup_residual(const VelocityField& field, const OsgoodCertificate& cert, double t1, double t2,
                                 double t3, std::span<const double> x, const StepController& ctrl = {}) {
  const FlowResult mid = integrate_flow(field, cert, t1, t3, x, ctrl);
  const FlowResult composed = integrate_flow(field, cert, t3, t2, mid.point, ctrl);
  const FlowResult direct = integrate_flow(field, cert, t1, t2, x, ctrl);
  return distance(composed.point, direct.point);
}

/// |X(t, s, X(s, t, x)) - x|.
inline double inverse_residual(const VelocityField& field, const OsgoodCertificate& cert, double s, double t,
                               std::span<const double> x, const StepController& ctrl = {}) {
  const FlowResult there = integrate_flow(field, cert, s, t, x, ctrl);
  const FlowResult back = integrate_flow(field, cert, t, s, there.point, ctrl);
  return distance(back.point, x);
}

/// Samples (t(s_k), x(s_k)) of a Lipschitz space-time curve on [0, L].
struct SpaceTimeCurve {
  std::vector<double> param;
  std::vector<double> time;
  std::vector<Point> position;
  double lipschitz = kInfinity;

  void validate() const {
    const std::size_t m = param.size();
    if (m == 0 || time.size() != m || position.size() != m) {
      throw std::invalid_argument("curve needs matching nonempty parameter, time and position samples");
    }
    for (std::size_t k = 1; k < m; ++k) {
      const double ds = param[k] - param[k - 1];
      if (!(ds > 0.0)) throw std::invalid_argument("curve parameter must increase");
      double inc2 = (time[k] - time[k - 1]) * (time[k] - time[k - 1]);
      for (std::size_t i = 0; i < position[k].size(); ++i) {
        inc2 += (position[k][i] - position[k - 1][i]) * (position[k][i] - position[k - 1][i]);
      }
      if (std::sqrt(inc2) > lipschitz * ds * (1.0 + 1e-9) + 1e-15) {
        throw std::invalid_argument("curve increment exceeds its Lipschitz bound");
      }
    }
  }
};

struct ConformanceReport {
  double max_deviation = 0.0;   // max_k |x(s_k) - X(t(0), t(s_k), x(0))|
  double budget = 0.0;          // sum_k |dt_k| C(t_k)
  double ode_residual = 0.0;    // sum_k |dx_k - dt_k V(midpoint)|
  double flow_error = 0.0;      // accumulated local error of the reference flow
  double envelope_bound = 0.0;  // envelope of ode_residual + flow_error over budget
  bool within_envelope = true;
};

/// Compares a reparametrized curve with dx = dt V(t, x) against the flow
/// started from its first point. The deviation is bounded by the Osgood
/// envelope of the curve's discrete ODE residual over the discrete budget.
inline ConformanceReport curve_conformance(const SpaceTimeCurve& curve, const VelocityField& field,
                                           const OsgoodCertificate& cert, const StepController& ctrl = {}) {
  curve.validate();
  ConformanceReport rep;
  const std::size_t m = curve.param.size();
  const std::size_t d = field.dim();
  Point mid(d), v(d);
  for (std::size_t k = 1; k < m; ++k) {
    const double dt = curve.time[k] - curve.time[k - 1];
    rep.budget += std::abs(dt) * cert.C(curve.time[k - 1]);
    for (std::size_t i = 0; i < d; ++i) mid[i] = 0.5 * (curve.position[k][i] + curve.position[k - 1][i]);
    field.eval(0.5 * (curve.time[k] + curve.time[k - 1]), mid, v);
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = curve.position[k][i] - curve.position[k - 1][i] - dt * v[i];
      r2 += r * r;
    }
    rep.ode_residual += std::sqrt(r2);
  }
  if (!std::isfinite(rep.budget)) throw std::domain_error("curve budget sum |dt| C(t) is not finite");

  Point y = curve.position.front();
  for (std::size_t k = 1; k < m; ++k) {
    const FlowResult step = integrate_flow(field, cert, curve.time[k - 1], curve.time[k], y, ctrl);
    y = step.point;
    rep.flow_error += step.local_error_estimate;
    rep.max_deviation = std::max(rep.max_deviation, distance(y, curve.position[k]));
  }
  const double perturbation = rep.ode_residual + rep.flow_error;
  if (perturbation == 0.0) {
    rep.envelope_bound = 0.0;
  } else if (perturbation >= 1.0) {
    rep.envelope_bound = 1.0;
  } else {
    rep.envelope_bound = separation_envelope(cert.modulus, perturbation, rep.budget).upper;
  }
  rep.within_envelope = rep.max_deviation <= rep.envelope_bound || rep.envelope_bound >= 1.0;
  return rep;
}

}  // namespace osgflow
