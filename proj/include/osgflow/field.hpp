#pragma once

// Velocity fields V(t, x) on [0, T] x R^d, their declared
// modulus and bound certificates, sampling-based refutation checks and ball mollification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "osgflow/modulus.hpp"
#include "osgflow/random.hpp"

namespace osgflow {

using Point = std::vector<double>;

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Nonnegative piecewise-constant function of time; integrals are exact.
class PiecewiseConstant {
 public:
  PiecewiseConstant() = default;

  PiecewiseConstant(std::vector<double> breaks, std::vector<double> values)
      : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.size() < 2 || values_.size() + 1 != breaks_.size()) {
      throw std::invalid_argument("piecewise profile needs n+1 breaks for n values");
    }
    for (std::size_t k = 1; k < breaks_.size(); ++k) {
      if (!(breaks_[k] > breaks_[k - 1])) throw std::invalid_argument("profile breaks must increase");
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("profile values must be finite and >= 0");
    }
  }

  static PiecewiseConstant constant(double value, double horizon) { return {{0.0, horizon}, {value}}; }

  const std::vector<double>& breaks() const noexcept { return breaks_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Value at t; times outside the breaks take the nearest piece.
  double operator()(double t) const {
    if (values_.empty()) return 0.0;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    std::ptrdiff_t piece = (it - breaks_.begin()) - 1;
    piece = std::clamp<std::ptrdiff_t>(piece, 0, static_cast<std::ptrdiff_t>(values_.size()) - 1);
    return values_[static_cast<std::size_t>(piece)];
  }

  /// int_{min(a,b)}^{max(a,b)} of the profile, restricted to the break range.
  double integral(double a, double b) const {
    if (a > b) std::swap(a, b);
    double total = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const double lo = std::max(a, breaks_[k]);
      const double hi = std::min(b, breaks_[k + 1]);
      if (hi > lo) total += values_[k] * (hi - lo);
    }
    return total;
  }

 private:
  std::vector<double> breaks_;
  std::vector<double> values_;
};

/// Declared |<V(x) - V(y), x - y>| <= C |x - y| rho(|x - y|) and |V| <= D.
struct OsgoodCertificate {
  Modulus modulus = Modulus::linear();
  PiecewiseConstant C;
  PiecewiseConstant D;
};

/// V(t, x) with x in R^d, t in [0, horizon]. Evaluators must be pure.
class VelocityField {
 public:
  using Evaluator = std::function<void(double, std::span<const double>, std::span<double>)>;

  VelocityField(std::string name, std::size_t dim, double horizon, Evaluator eval, bool smooth = true)
      : name_(std::move(name)), dim_(dim), horizon_(horizon), eval_(std::move(eval)), smooth_(smooth) {
    if (dim_ == 0) throw std::invalid_argument("field dimension must be positive");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("field horizon must be positive");
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  double horizon() const noexcept { return horizon_; }
  /// False for discontinuous or mollified-discontinuous fields; the flow
  /// integrator then switches to fixed steps.
  bool smooth() const noexcept { return smooth_; }

  void eval(double t, std::span<const double> x, std::span<double> out) const { eval_(t, x, out); }

  Point operator()(double t, std::span<const double> x) const {
    Point v(dim_);
    eval_(t, x, v);
    return v;
  }

 private:
  std::string name_;
  std::size_t dim_;
  double horizon_;
  Evaluator eval_;
  bool smooth_;
};

// ---------------------------------------------------------------------------
// Built-in fields

/// V(x, y) = (-y, x).
inline VelocityField rotation_field(double horizon = 2.0 * std::numbers::pi) {
  return VelocityField("rotation", 2, horizon, [](double, std::span<const double> x, std::span<double> v) {
    v[0] = -x[1];
    v[1] = x[0];
  });
}

inline VelocityField constant_field(Point velocity, double horizon = 1.0) {
  const std::size_t d = velocity.size();
  return VelocityField("constant", d, horizon,
                       [velocity = std::move(velocity)](double, std::span<const double>, std::span<double> v) {
                         std::copy(velocity.begin(), velocity.end(), v.begin());
                       });
}

inline VelocityField zero_field(std::size_t dim, double horizon = 1.0) {
  return constant_field(Point(dim, 0.0), horizon);
}

/// Radial profile g(s) = s(1 - ln s) on [0, 1), g(s) = s beyond.
inline double radial_loglip_profile(double s) {
  if (s <= 0.0) return 0.0;
  return s < 1.0 ? s * (1.0 - std::log(s)) : s;
}

/// V(x) = (x / |x|) g(|x|). In d = 1 this is x (1 - ln|x|) for |x| < 1.
inline VelocityField radial_loglip_field(std::size_t dim, double horizon = 1.0) {
  return VelocityField("radial_loglip", dim, horizon, [](double, std::span<const double> x, std::span<double> v) {
    const double r = norm(x);
    // g(r) / r = 1 - ln r, which tends to +inf at 0 while v itself tends to 0.
    const double scale = r > 0.0 ? radial_loglip_profile(r) / r : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = scale * x[i];
  });
}

/// V(x) = sign(x) in one dimension, sign(0) = 0.
inline VelocityField sign_field(double horizon = 1.0) {
  return VelocityField(
      "sign", 1, horizon,
      [](double, std::span<const double> x, std::span<double> v) { v[0] = x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0); },
      false);
}

/// Multilinear interpolation of samples on a uniform (t, x_1, ..., x_d)
/// grid; points outside the grid are clamped to its boundary.
struct TabulatedGrid {
  struct Axis {
    std::size_t n = 2;
    double lo = 0.0;
    double hi = 1.0;
  };
  std::size_t dim = 1;
  double horizon = 1.0;
  Axis time;
  std::vector<Axis> space;
  // Row-major over (time, space[0], ..., space[d-1]) with dim components each.
  std::vector<double> data;

  std::size_t node_count() const {
    std::size_t n = time.n;
    for (const auto& a : space) n *= a.n;
    return n;
  }

  void validate() const {
    if (space.size() != dim) throw std::invalid_argument("tabulated field needs one axis per dimension");
    auto check = [](const Axis& a) {
      if (a.n < 1 || (a.n > 1 && !(a.hi > a.lo))) throw std::invalid_argument("bad tabulated axis");
    };
    check(time);
    for (const auto& a : space) check(a);
    if (data.size() != node_count() * dim) throw std::invalid_argument("tabulated field has the wrong sample count");
    for (double v : data) {
      if (!std::isfinite(v)) throw std::invalid_argument("tabulated field has non-finite samples");
    }
  }
};

inline VelocityField tabulated_field(TabulatedGrid grid) {
  grid.validate();
  const std::size_t d = grid.dim;
  const double horizon = grid.horizon;
  auto shared = std::make_shared<const TabulatedGrid>(std::move(grid));
  return VelocityField("tabulated", d, horizon, [g = shared](double t, std::span<const double> x, std::span<double> v) {
    const std::size_t axes = g->dim + 1;
    // Per axis: lower index, fraction, stride.
    std::vector<std::size_t> base(axes), stride(axes);
    std::vector<double> frac(axes);
    auto locate = [](const TabulatedGrid::Axis& a, double c, std::size_t& i0, double& f) {
      if (a.n == 1) {
        i0 = 0;
        f = 0.0;
        return;
      }
      const double u = std::clamp((c - a.lo) / (a.hi - a.lo), 0.0, 1.0) * static_cast<double>(a.n - 1);
      i0 = std::min(static_cast<std::size_t>(u), a.n - 2);
      f = u - static_cast<double>(i0);
    };
    locate(g->time, t, base[0], frac[0]);
    for (std::size_t i = 0; i < g->dim; ++i) locate(g->space[i], x[i], base[i + 1], frac[i + 1]);
    std::size_t s = 1;
    for (std::size_t a = axes; a-- > 0;) {
      stride[a] = s;
      s *= (a == 0 ? g->time.n : g->space[a - 1].n);
    }
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t corner = 0; corner < (std::size_t{1} << axes); ++corner) {
      double w = 1.0;
      std::size_t idx = 0;
      for (std::size_t a = 0; a < axes; ++a) {
        const bool up = (corner >> a) & 1U;
        const std::size_t n = a == 0 ? g->time.n : g->space[a - 1].n;
        if (up && n == 1) {
          w = 0.0;
          break;
        }
        w *= up ? frac[a] : 1.0 - frac[a];
        idx += (base[a] + (up ? 1 : 0)) * stride[a];
      }
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < g->dim; ++c) v[c] += w * g->data[idx * g->dim + c];
    }
  });
}

// ---------------------------------------------------------------------------
// Built-in certificates

/// A field together with its declared certificate. For the sign field the
/// certificate is nominal: the modulus condition fails near the discontinuity.
struct BuiltinField {
  VelocityField field;
  OsgoodCertificate certificate;
  bool osgood_holds = true;
  /// Radius of the ball on which the declared D bounds |V| (inf = everywhere).
  double bound_radius = kInfinity;
};

/// The radial log-Lipschitz field satisfies the modulus condition with the log-Lipschitz
/// modulus and C = 2 + ln 2: the symmetric gradient has eigenvalues at most
/// 1 + ln+(1/|z|), and the mean of ln(1/|z|) along a segment of length L is
/// at most 1 + ln 2 - ln L.
inline constexpr double kRadialLoglipC = 2.0 + std::numbers::ln2;

inline BuiltinField make_builtin(const std::string& name, std::size_t dim = 2, double horizon = 0.0,
                                 const Point& velocity = {}) {
  if (name == "rotation") {
    const double T = horizon > 0.0 ? horizon : 2.0 * std::numbers::pi;
    return {rotation_field(T),
            {Modulus::linear(), PiecewiseConstant::constant(1.0, T), PiecewiseConstant::constant(1.0, T)},
            true,
            1.0};
  }
  if (name == "constant") {
    const double T = horizon > 0.0 ? horizon : 1.0;
    Point v = velocity;
    if (v.empty()) {
      v.assign(dim, 0.0);
      v[0] = 1.0;
    }
    const double speed = norm(v);
    return {constant_field(v, T),
            {Modulus::linear(), PiecewiseConstant::constant(1.0, T), PiecewiseConstant::constant(speed, T)},
            true,
            kInfinity};
  }
  if (name == "radial_loglip") {
    const double T = horizon > 0.0 ? horizon : 1.0;
    return {radial_loglip_field(dim, T),
            {Modulus::log_lipschitz(), PiecewiseConstant::constant(kRadialLoglipC, T),
             PiecewiseConstant::constant(1.0, T)},
            true,
            1.0};
  }
  if (name == "sign") {
    const double T = horizon > 0.0 ? horizon : 1.0;
    return {sign_field(T),
            {Modulus::linear(), PiecewiseConstant::constant(1.0, T), PiecewiseConstant::constant(1.0, T)},
            false,
            kInfinity};
  }
  throw std::invalid_argument("unknown field '" + name + "'");
}

// ---------------------------------------------------------------------------
// Sampling-based checks. These refute a certificate; they never certify one.

struct PairSample {
  double t = 0.0;
  Point x;
  Point y;
};

/// Seeded generator of (t, x, y): t uniform on [0, T], x uniform in the ball
/// of radius `radius`, y = x + r u with r log-uniform in [min_sep, max_sep].
class PairSampler {
 public:
  PairSampler(std::size_t dim, double horizon, double radius, double min_sep, double max_sep, std::uint64_t seed)
      : dim_(dim), horizon_(horizon), radius_(radius), min_sep_(min_sep), max_sep_(max_sep), rng_(seed) {
    if (!(min_sep > 0.0 && max_sep >= min_sep && max_sep < 1.0)) {
      throw std::invalid_argument("pair separations must lie in (0, 1)");
    }
  }

  PairSample next() {
    PairSample s;
    s.t = horizon_ * rng_.uniform();
    s.x = rng_.in_ball(dim_, radius_);
    const Point u = rng_.on_sphere(dim_);
    const double r = std::exp(std::log(min_sep_) + (std::log(max_sep_) - std::log(min_sep_)) * rng_.uniform());
    s.y = s.x;
    for (std::size_t i = 0; i < dim_; ++i) s.y[i] += r * u[i];
    return s;
  }

 private:
  std::size_t dim_;
  double horizon_;
  double radius_;
  double min_sep_;
  double max_sep_;
  SplitMix64 rng_;
};

struct ViolationReport {
  double worst_ratio = 0.0;
  double witness_t = 0.0;
  Point witness_x;
  Point witness_y;
  std::size_t samples_checked = 0;
  std::size_t skipped = 0;  // coincident pairs
};

namespace detail {

inline double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  if (den == 0.0) return kInfinity;
  return num / den;
}

inline void record(ViolationReport& rep, double ratio, const PairSample& s) {
  if (rep.witness_x.empty() || ratio > rep.worst_ratio) {
    rep.worst_ratio = ratio;
    rep.witness_t = s.t;
    rep.witness_x = s.x;
    rep.witness_y = s.y;
  }
}

}  // namespace detail

/// max |<V(t,x) - V(t,y), x - y>| / (C(t) |x - y| rho(|x - y|)) over n samples.
inline ViolationReport check_osgood(const VelocityField& field, const OsgoodCertificate& cert, PairSampler& sampler,
                                    std::size_t n) {
  if (n == 0) throw std::invalid_argument("check_osgood needs at least one sample");
  ViolationReport rep;
  Point vx(field.dim()), vy(field.dim());
  for (std::size_t k = 0; k < n; ++k) {
    const PairSample s = sampler.next();
    const double sep = distance(s.x, s.y);
    if (sep == 0.0) {
      ++rep.skipped;
      continue;
    }
    field.eval(s.t, s.x, vx);
    field.eval(s.t, s.y, vy);
    double inner = 0.0;
    for (std::size_t i = 0; i < field.dim(); ++i) inner += (vx[i] - vy[i]) * (s.x[i] - s.y[i]);
    const double ratio = detail::safe_ratio(std::abs(inner), cert.C(s.t) * sep * cert.modulus(sep));
    detail::record(rep, ratio, s);
    ++rep.samples_checked;
  }
  return rep;
}

/// max |V(t,x)| / D(t) over n samples (only x of each pair is used).
inline ViolationReport check_bound(const VelocityField& field, const OsgoodCertificate& cert, PairSampler& sampler,
                                   std::size_t n) {
  if (n == 0) throw std::invalid_argument("check_bound needs at least one sample");
  ViolationReport rep;
  Point vx(field.dim());
  for (std::size_t k = 0; k < n; ++k) {
    const PairSample s = sampler.next();
    field.eval(s.t, s.x, vx);
    detail::record(rep, detail::safe_ratio(norm(vx), cert.D(s.t)), s);
    ++rep.samples_checked;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Mollification

/// Quadrature rule on the unit ball: offsets and weights summing to 1.
/// All built-in stencils are symmetric under o -> -o.
struct BallStencil {
  std::vector<Point> offsets;
  std::vector<double> weights;
};

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton on P_n.
inline void gauss_legendre(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * static_cast<double>(j) - 1.0) * z * p1 - (static_cast<double>(j) - 1.0) * p2) /
             static_cast<double>(j);
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  // Enforce exact antisymmetry of the nodes.
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double a = 0.5 * (x[n - 1 - i] - x[i]);
    x[i] = -a;
    x[n - 1 - i] = a;
    const double b = 0.5 * (w[i] + w[n - 1 - i]);
    w[i] = w[n - 1 - i] = b;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

}  // namespace detail

/// Symmetric ball rule with `order` Gauss points per radial/axis direction.
inline BallStencil ball_stencil(std::size_t dim, std::size_t order = 6) {
  BallStencil st;
  std::vector<double> gx, gw;
  if (dim == 1) {
    detail::gauss_legendre(order, gx, gw);
    for (std::size_t i = 0; i < order; ++i) {
      st.offsets.push_back({gx[i]});
      st.weights.push_back(gw[i] / 2.0);
    }
    return st;
  }
  if (dim == 2) {
    // Polar rule: radial Gauss on [0,1] with weight r, 4*order equispaced angles.
    detail::gauss_legendre(order, gx, gw);
    const std::size_t n_ang = 4 * order;
    double total = 0.0;
    for (std::size_t i = 0; i < order; ++i) {
      const double r = 0.5 * (gx[i] + 1.0);
      for (std::size_t j = 0; j < n_ang; ++j) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_ang);
        st.offsets.push_back({r * std::cos(th), r * std::sin(th)});
        st.weights.push_back(gw[i] * r);
        total += gw[i] * r;
      }
    }
    for (double& w : st.weights) w /= total;
    return st;
  }
  // Tensor Gauss rule on the cube, restricted to the ball.
  detail::gauss_legendre(order, gx, gw);
  std::vector<std::size_t> idx(dim, 0);
  double total = 0.0;
  while (true) {
    Point o(dim);
    double w = 1.0, r2 = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      o[a] = gx[idx[a]];
      w *= gw[idx[a]];
      r2 += o[a] * o[a];
    }
    if (r2 <= 1.0) {
      st.offsets.push_back(std::move(o));
      st.weights.push_back(w);
      total += w;
    }
    std::size_t a = 0;
    while (a < dim && ++idx[a] == order) idx[a++] = 0;
    if (a == dim) break;
  }
  for (double& w : st.weights) w /= total;
  return st;
}

/// x -> average of V(t, .) over the ball of radius r around x. For fields
/// satisfying the modulus condition with (C, rho), the average satisfies it with C and
/// rho(. + 2r) up to the stencil's quadrature error.
inline VelocityField mollify(const VelocityField& field, double radius, BallStencil stencil) {
  if (!(radius > 0.0)) throw std::invalid_argument("mollification radius must be positive");
  const std::size_t d = field.dim();
  if (stencil.offsets.empty() || stencil.offsets.front().size() != d) {
    throw std::invalid_argument("stencil dimension does not match the field");
  }
  auto st = std::make_shared<const BallStencil>(std::move(stencil));
  return VelocityField(
      field.name() + "_mollified", d, field.horizon(),
      [field, st, radius, d](double t, std::span<const double> x, std::span<double> v) {
        Point y(d), vy(d);
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t k = 0; k < st->offsets.size(); ++k) {
          for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + radius * st->offsets[k][i];
          field.eval(t, y, vy);
          for (std::size_t i = 0; i < d; ++i) v[i] += st->weights[k] * vy[i];
        }
      },
      field.smooth());
}

}  // namespace osgflow
