#pragma once

// Particle-versus-grid cross-validation for a Gaussian density. Both
// solutions are deposited with cloud-in-cell weights on a common comparison
// lattice before taking the flat distance. The deposit is the adjoint of
// bilinear interpolation, which maps admissible test functions to test
// functions with Lipschitz constant at most sqrt(2), so the lattice distance
// stays within sqrt(2) of the distance between the raw solutions.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "osgflow/flat_distance.hpp"
#include "osgflow/flow.hpp"
#include "osgflow/measure.hpp"
#include "osgflow/pde.hpp"
#include "osgflow/upwind.hpp"

namespace osgflow {

struct CrossValidationConfig {
  Point center{0.4, 0.0};
  double sigma = 0.15;
  double final_time = std::numbers::pi / 2.0;
  std::vector<double> spacings{1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0};
  double domain_lo = -1.0;
  double domain_hi = 1.0;
  std::size_t particles_per_axis = 100;  // 10^4 atoms
  double particle_box = 5.0;             // half width in units of sigma
  double cfl = 0.9;
  double comparison_spacing = 1.0 / 16.0;
  double scale = 1.0;
  StepController ctrl{};
};

struct CrossValidationRow {
  double h = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  double grid_mass = 0.0;
  double outflow = 0.0;
  double flat_distance = 0.0;
  double ratio = 0.0;  // previous row's distance / this one; 0 on the first row
};

namespace detail {

// Mass of the normalized isotropic Gaussian in [a0, a1] x [b0, b1].
inline double gaussian_box_mass(const Point& c, double sigma, double a0, double a1, double b0, double b1) {
  const double s = sigma * std::numbers::sqrt2;
  const double mx = 0.5 * (std::erf((a1 - c[0]) / s) - std::erf((a0 - c[0]) / s));
  const double my = 0.5 * (std::erf((b1 - c[1]) / s) - std::erf((b0 - c[1]) / s));
  return mx * my;
}

}  // namespace detail

/// Cloud-in-cell deposit of a 2D measure on the lattice lo + k H, k = 0..n.
inline SignedParticleMeasure deposit_on_lattice(const SignedParticleMeasure& mu, double lo, double hi, double H) {
  if (mu.dim() != 2) throw std::invalid_argument("lattice deposit works on 2D measures");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / H));
  std::vector<double> w((n + 1) * (n + 1), 0.0);
  for (const Atom& a : mu.atoms()) {
    const double u = std::clamp((a.position[0] - lo) / H, 0.0, static_cast<double>(n));
    const double v = std::clamp((a.position[1] - lo) / H, 0.0, static_cast<double>(n));
    const std::size_t i = std::min(static_cast<std::size_t>(u), n - 1);
    const std::size_t j = std::min(static_cast<std::size_t>(v), n - 1);
    const double fu = u - static_cast<double>(i), fv = v - static_cast<double>(j);
    w[j * (n + 1) + i] += a.weight * (1.0 - fu) * (1.0 - fv);
    w[j * (n + 1) + i + 1] += a.weight * fu * (1.0 - fv);
    w[(j + 1) * (n + 1) + i] += a.weight * (1.0 - fu) * fv;
    w[(j + 1) * (n + 1) + i + 1] += a.weight * fu * fv;
  }
  std::vector<Atom> atoms;
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      if (w[j * (n + 1) + i] != 0.0) {
        atoms.push_back({{lo + static_cast<double>(i) * H, lo + static_cast<double>(j) * H}, w[j * (n + 1) + i]});
      }
    }
  }
  return SignedParticleMeasure(2, std::move(atoms));
}

/// Quadrature sample of the Gaussian: one atom per cell of a uniform
/// n x n lattice on the box centre +- box * sigma, weighted by the exact cell mass.
inline SignedParticleMeasure sample_gaussian(const Point& center, double sigma, std::size_t n, double box) {
  std::vector<Atom> atoms;
  atoms.reserve(n * n);
  const double lo_x = center[0] - box * sigma, lo_y = center[1] - box * sigma;
  const double d = 2.0 * box * sigma / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a0 = lo_x + static_cast<double>(i) * d, b0 = lo_y + static_cast<double>(j) * d;
      atoms.push_back({{a0 + 0.5 * d, b0 + 0.5 * d}, detail::gaussian_box_mass(center, sigma, a0, a0 + d, b0, b0 + d)});
    }
  }
  return SignedParticleMeasure(2, std::move(atoms));
}

inline GridDensity gaussian_grid(const Point& center, double sigma, double lo, double hi, double h) {
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / h));
  GridDensity g(n, n, lo, lo, h);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a0 = lo + static_cast<double>(i) * h, b0 = lo + static_cast<double>(j) * h;
      g.at(i, j) = detail::gaussian_box_mass(center, sigma, a0, a0 + h, b0, b0 + h) / (h * h);
    }
  }
  return g;
}

/// Largest stable donor-cell step: cfl * h / max over faces of (|u| + |v|).
inline double stable_step(const VelocityField& field, double lo, double hi, double h, double cfl) {
  double worst = 0.0;
  Point p(2), v(2);
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / h));
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      p = {lo + static_cast<double>(i) * h, lo + static_cast<double>(j) * h};
      field.eval(0.0, p, v);
      worst = std::max(worst, std::abs(v[0]) + std::abs(v[1]));
    }
  }
  return worst > 0.0 ? cfl * h / (2.0 * worst) : h;
}

inline std::vector<CrossValidationRow> cross_validate(const VelocityField& field, const OsgoodCertificate& cert,
                                                      const CrossValidationConfig& cfg) {
  if (field.dim() != 2) throw std::invalid_argument("cross validation works on 2D fields");
  const SignedParticleMeasure mu0 = sample_gaussian(cfg.center, cfg.sigma, cfg.particles_per_axis, cfg.particle_box);
  const MeasureTrajectory traj = transport_solution(mu0, field, cert, {0.0, cfg.final_time}, cfg.ctrl);
  const SignedParticleMeasure particles =
      deposit_on_lattice(traj.snapshots.back(), cfg.domain_lo, cfg.domain_hi, cfg.comparison_spacing);
  const std::size_t limit = std::max<std::size_t>(kDefaultFlatAtomLimit, particles.size() * 4);

  std::vector<CrossValidationRow> rows;
  for (double h : cfg.spacings) {
    CrossValidationRow row;
    row.h = h;
    row.dt = stable_step(field, cfg.domain_lo, cfg.domain_hi, h, cfg.cfl);
    const GridDensity g0 = gaussian_grid(cfg.center, cfg.sigma, cfg.domain_lo, cfg.domain_hi, h);
    const UpwindResult up = upwind_reference(g0, field, row.dt, cfg.final_time);
    row.steps = up.steps;
    row.outflow = up.outflow;
    row.grid_mass = up.frames.back().total_mass();
    const SignedParticleMeasure grid =
        deposit_on_lattice(up.frames.back().as_measure(), cfg.domain_lo, cfg.domain_hi, cfg.comparison_spacing);
    row.flat_distance = flat_distance(particles, grid, cfg.scale, limit);
    if (!rows.empty() && row.flat_distance > 0.0) row.ratio = rows.back().flat_distance / row.flat_distance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace osgflow
