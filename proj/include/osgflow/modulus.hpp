#pragma once

// Moduli of continuity, the Osgood integral Phi(a, b) = int_a^b ds / rho(s),
// and the two-sided comparison envelopes obtained by inverting Phi.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace osgflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class ModulusKind { linear, log_lipschitz, power, tabulated };

/// A modulus of continuity rho on [0, 1), extended by +infinity on [1, inf).
class Modulus {
 public:
  static Modulus linear() { return Modulus(ModulusKind::linear); }
  static Modulus log_lipschitz() { return Modulus(ModulusKind::log_lipschitz); }

  /// rho(s) = s^alpha with alpha in (0, 1); not Osgood.
  static Modulus power(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw std::domain_error("power modulus needs alpha in (0, 1)");
    }
    Modulus m(ModulusKind::power);
    m.alpha_ = alpha;
    return m;
  }

  /// Piecewise-linear modulus through (s_k, rho_k). The table must start at
  /// (0, 0), end at s = 1, be nondecreasing, and have rho_1 > 0.
  static Modulus tabulated(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2) throw std::invalid_argument("tabulated modulus needs >= 2 nodes");
    if (table.front().first != 0.0 || table.front().second != 0.0) {
      throw std::invalid_argument("tabulated modulus must start at (0, 0)");
    }
    if (table.back().first != 1.0) {
      throw std::invalid_argument("tabulated modulus must end at s = 1");
    }
    for (std::size_t k = 1; k < table.size(); ++k) {
      if (!(table[k].first > table[k - 1].first) || table[k].second < table[k - 1].second ||
          !std::isfinite(table[k].second)) {
        throw std::invalid_argument("tabulated modulus must be increasing in s and nondecreasing in rho");
      }
    }
    if (!(table[1].second > 0.0)) throw std::invalid_argument("tabulated modulus must be positive for s > 0");
    Modulus m(ModulusKind::tabulated);
    m.table_ = std::move(table);
    return m;
  }

  /// Parses "linear", "loglip", "power:<alpha>".
  static Modulus parse(const std::string& spec) {
    if (spec == "linear") return linear();
    if (spec == "loglip" || spec == "log_lipschitz") return log_lipschitz();
    if (spec.rfind("power:", 0) == 0) {
      std::size_t used = 0;
      const std::string arg = spec.substr(6);
      double alpha = 0.0;
      try {
        alpha = std::stod(arg, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != arg.size()) throw std::invalid_argument("bad power exponent in '" + spec + "'");
      return power(alpha);
    }
    throw std::invalid_argument("unknown modulus '" + spec + "'");
  }

  ModulusKind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }
  const std::vector<std::pair<double, double>>& table() const noexcept { return table_; }

  /// True for the kinds whose Osgood integral diverges at 0.
  bool is_osgood() const noexcept { return kind_ != ModulusKind::power; }

  std::string name() const {
    switch (kind_) {
      case ModulusKind::linear: return "linear";
      case ModulusKind::log_lipschitz: return "loglip";
      case ModulusKind::power: return "power:" + std::to_string(alpha_);
      case ModulusKind::tabulated: return "tabulated";
    }
    return "unknown";
  }

  double operator()(double s) const {
    if (!(s >= 0.0)) throw std::domain_error("modulus evaluated at a negative argument");
    if (s >= 1.0) return kInfinity;
    if (s == 0.0) return 0.0;
    switch (kind_) {
      case ModulusKind::linear: return s;
      case ModulusKind::log_lipschitz: return s * (1.0 - std::log(s));
      case ModulusKind::power: return std::pow(s, alpha_);
      case ModulusKind::tabulated: {
        auto hi = std::upper_bound(table_.begin(), table_.end(), s,
                                   [](double v, const auto& node) { return v < node.first; });
        auto lo = hi - 1;
        const double lam = (s - lo->first) / (hi->first - lo->first);
        return lo->second + lam * (hi->second - lo->second);
      }
    }
    return kInfinity;
  }

 private:
  explicit Modulus(ModulusKind kind) : kind_(kind) {}

  ModulusKind kind_;
  double alpha_ = 0.0;
  std::vector<std::pair<double, double>> table_;
};

inline double eval_modulus(const Modulus& m, double s) { return m(s); }

namespace detail {

// Integral of 1/rho over [a, b] with 0 < a < b <= 1 by Gauss-Kronrod on a
// geometric partition, so each piece sees a bounded variation of 1/rho.
inline double osgood_quadrature(const Modulus& m, double a, double b) {
  std::vector<double> cuts{a};
  constexpr double kRatio = 4.0;
  for (double c = a * kRatio; c < b; c *= kRatio) cuts.push_back(c);
  if (m.kind() == ModulusKind::tabulated) {
    for (const auto& node : m.table()) {
      if (node.first > a && node.first < b) cuts.push_back(node.first);
    }
    std::sort(cuts.begin(), cuts.end());
  }
  cuts.push_back(b);
  auto integrand = [&m](double s) { return 1.0 / m(s); };
  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    if (cuts[k] <= cuts[k - 1]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, cuts[k - 1], cuts[k], 10,
                                                                          1e-12);
  }
  return total;
}

// Phi on 0 < a <= b <= 1 (b = 1 means the left limit 1^-).
inline double osgood_integral_ordered(const Modulus& m, double a, double b) {
  if (a == b) return 0.0;
  switch (m.kind()) {
    case ModulusKind::linear: return std::log(b / a);
    case ModulusKind::log_lipschitz: return std::log((1.0 - std::log(a)) / (1.0 - std::log(b)));
    default: return osgood_quadrature(m, a, b);
  }
}

// Phi(0+, b), finite only for non-Osgood moduli.
inline double osgood_integral_from_zero(const Modulus& m, double b) {
  if (m.is_osgood()) return kInfinity;
  // The integrand s^-alpha is singular at 0; the piece [0, tiny] is added in closed form.
  const double alpha = m.alpha();
  const double tiny = std::min(b, 1e-12);
  return std::pow(tiny, 1.0 - alpha) / (1.0 - alpha) + osgood_integral_ordered(m, tiny, b);
}

}  // namespace detail

/// Phi(a, b) = int_a^b ds / rho(s) for a, b in (0, 1); antisymmetric in (a, b).
inline double osgood_integral(const Modulus& m, double a, double b) {
  if (!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0)) {
    throw std::domain_error("osgood_integral needs both endpoints in (0, 1)");
  }
  if (a <= b) return detail::osgood_integral_ordered(m, a, b);
  return -detail::osgood_integral_ordered(m, b, a);
}

/// Two-sided separation bounds for |d'| <= c(s) rho(d) with int c = budget.
struct Envelope {
  double d0 = 0.0;
  double budget = 0.0;
  double upper = 0.0;  // 1 means the bound left the controlled region [0, 1)
  double lower = 0.0;
};

namespace detail {

// Bisection for an increasing function f on [lo, hi] in log coordinates.
template <typename F>
double bisect_log(F&& f, double target, double lo, double hi) {
  double log_lo = std::log(lo);
  double log_hi = std::log(hi);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (log_lo + log_hi);
    if (f(std::exp(mid)) < target) {
      log_lo = mid;
    } else {
      log_hi = mid;
    }
    if (log_hi - log_lo <= 1e-14) break;
  }
  return std::exp(0.5 * (log_lo + log_hi));
}

}  // namespace detail

inline Envelope separation_envelope(const Modulus& m, double d0, double budget) {
  if (!(d0 >= 0.0 && d0 < 1.0)) throw std::domain_error("separation_envelope needs d0 in [0, 1)");
  if (!(budget >= 0.0) || !std::isfinite(budget)) {
    throw std::domain_error("separation_envelope needs a finite nonnegative budget");
  }
  Envelope env{d0, budget, d0, d0};
  if (d0 == 0.0) {
    if (!m.is_osgood() && budget > 0.0) {
      // Non-Osgood: zero separation can grow. The envelope is the maximal
      // solution from 0, i.e. the u with Phi(0+, u) = budget.
      const double full = detail::osgood_integral_from_zero(m, 1.0);
      env.upper = budget >= full
                      ? 1.0
                      : detail::bisect_log([&](double u) { return detail::osgood_integral_from_zero(m, u); },
                                           budget, std::numeric_limits<double>::min(), 1.0);
    }
    return env;
  }
  if (budget == 0.0) return env;

  // Upper branch: Phi(d0, upper) = budget, saturating at 1.
  const double to_one = detail::osgood_integral_ordered(m, d0, 1.0);
  if (budget >= to_one) {
    env.upper = 1.0;
  } else {
    env.upper = detail::bisect_log([&](double u) { return detail::osgood_integral_ordered(m, d0, u); }, budget, d0,
                                   1.0);
  }

  // Lower branch: Phi(lower, d0) = budget; bracket by walking down in log scale.
  auto phi_down = [&](double l) { return detail::osgood_integral_ordered(m, l, d0); };
  if (!m.is_osgood() && budget >= detail::osgood_integral_from_zero(m, d0)) {
    env.lower = 0.0;
    return env;
  }
  double step = 1.0;
  double bracket = d0;
  while (true) {
    const double log_next = std::log(bracket) - step;
    if (log_next < std::log(std::numeric_limits<double>::min())) {
      const double floor = std::numeric_limits<double>::min();
      if (phi_down(floor) < budget) {
        env.lower = 0.0;  // underflows double precision
        return env;
      }
      bracket = floor;
      break;
    }
    bracket = std::exp(log_next);
    if (phi_down(bracket) >= budget) break;
    step *= 2.0;
  }
  // phi_down is decreasing in l; bisect on -phi_down.
  env.lower = detail::bisect_log([&](double l) { return -phi_down(l); }, -budget, bracket, d0);
  return env;
}

struct OsgoodDiagnostic {
  std::vector<double> eps;
  std::vector<double> values;  // Phi(eps, 1/2)
  std::string verdict;         // "diverging", "bounded" or "inconclusive"
};

/// Heuristic divergence check of Phi(eps, 1/2) as eps -> 0. Increments are
/// normalized by the growth of ln ln(1/eps), the scale on which the
/// log-Lipschitz integral diverges; a last normalized increment below 0.25
/// reads as "bounded". Numerical evidence only, never a proof.
inline OsgoodDiagnostic osgood_diagnostic(const Modulus& m, const std::vector<double>& eps_grid) {
  if (eps_grid.empty()) throw std::invalid_argument("osgood_diagnostic needs a nonempty grid");
  OsgoodDiagnostic out;
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    const double e = eps_grid[k];
    if (!(e > 0.0 && e < 0.5)) throw std::invalid_argument("grid points must lie in (0, 1/2)");
    if (k > 0 && !(e < eps_grid[k - 1])) throw std::invalid_argument("grid must be strictly decreasing");
    out.eps.push_back(e);
    out.values.push_back(osgood_integral(m, e, 0.5));
  }
  if (eps_grid.size() < 2) {
    out.verdict = "inconclusive";
    return out;
  }
  const std::size_t n = eps_grid.size();
  const double dvalue = out.values[n - 1] - out.values[n - 2];
  const double dscale = std::log(-std::log(eps_grid[n - 1])) - std::log(-std::log(eps_grid[n - 2]));
  out.verdict = dvalue / dscale > 0.25 ? "diverging" : "bounded";
  return out;
}

}  // namespace osgflow
