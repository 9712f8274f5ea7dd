#pragma once

// First-order donor-cell finite volumes for a nonnegative density on a
// rectangular 2D grid with zero inflow at the boundary. Independent of the
// particle route; used to cross-validate it.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "osgflow/field.hpp"
#include "osgflow/measure.hpp"

namespace osgflow {

/// Cell averages on [x0, x0 + nx h] x [y0, y0 + ny h]; value(i, j) at index j * nx + i.
struct GridDensity {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 1.0;
  std::vector<double> values;

  GridDensity() = default;
  GridDensity(std::size_t nx_, std::size_t ny_, double x0_, double y0_, double h_)
      : nx(nx_), ny(ny_), x0(x0_), y0(y0_), h(h_), values(nx_ * ny_, 0.0) {
    if (nx == 0 || ny == 0 || !(h > 0.0)) throw std::invalid_argument("grid needs positive size and spacing");
  }

  double& at(std::size_t i, std::size_t j) { return values[j * nx + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
  double cell_x(std::size_t i) const { return x0 + (static_cast<double>(i) + 0.5) * h; }
  double cell_y(std::size_t j) const { return y0 + (static_cast<double>(j) + 0.5) * h; }

  double total_mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * h * h;
  }

  /// Cell masses as atoms at the cell centres.
  SignedParticleMeasure as_measure() const {
    std::vector<Atom> atoms;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (at(i, j) != 0.0) atoms.push_back({{cell_x(i), cell_y(j)}, at(i, j) * h * h});
      }
    }
    return SignedParticleMeasure(2, std::move(atoms));
  }
};

struct UpwindResult {
  std::vector<double> times;
  std::vector<GridDensity> frames;
  double outflow = 0.0;  // mass that left through the boundary
  std::size_t steps = 0;
};

/// Evolves `density` to time T with steps of at most dt. The positivity
/// condition dt * (sum of outgoing face speeds) / h <= 1 is checked on every
/// cell at every step. `record_every` > 0 also stores intermediate frames.
inline UpwindResult upwind_reference(const GridDensity& density, const VelocityField& field, double dt, double T,
                                     std::size_t record_every = 0) {
  if (field.dim() != 2) throw std::invalid_argument("upwind_reference works on 2D fields");
  if (!(dt > 0.0) || !(T >= 0.0)) throw std::invalid_argument("upwind_reference needs dt > 0 and T >= 0");
  for (double v : density.values) {
    if (!(v >= 0.0)) throw std::invalid_argument("upwind_reference needs a nonnegative density");
  }
  const std::size_t nx = density.nx, ny = density.ny;
  const double h = density.h;
  UpwindResult res;
  res.times.push_back(0.0);
  res.frames.push_back(density);
  GridDensity cur = density;
  std::vector<double> fx((nx + 1) * ny), fy(nx * (ny + 1));  // face normal velocities
  std::vector<double> flux_x((nx + 1) * ny), flux_y(nx * (ny + 1));
  Point p(2), v(2);
  const auto n_steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  double t = 0.0;
  for (std::size_t step = 0; step < n_steps; ++step) {
    const double tau = step + 1 == n_steps ? T - t : dt;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i <= nx; ++i) {
        p = {density.x0 + static_cast<double>(i) * h, cur.cell_y(j)};
        field.eval(t, p, v);
        fx[j * (nx + 1) + i] = v[0];
      }
    }
    for (std::size_t j = 0; j <= ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        p = {cur.cell_x(i), density.y0 + static_cast<double>(j) * h};
        field.eval(t, p, v);
        fy[j * nx + i] = v[1];
      }
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double out = std::max(fx[j * (nx + 1) + i + 1], 0.0) + std::max(-fx[j * (nx + 1) + i], 0.0) +
                           std::max(fy[(j + 1) * nx + i], 0.0) + std::max(-fy[j * nx + i], 0.0);
        worst = std::max(worst, out);
      }
    }
    if (tau * worst / h > 1.0 + 1e-12) {
      throw std::invalid_argument("CFL condition violated: dt * max outgoing speed / h = " +
                                  std::to_string(tau * worst / h));
    }
    // Donor-cell fluxes; the exterior density is zero.
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i <= nx; ++i) {
        const double u = fx[j * (nx + 1) + i];
        const double left = i > 0 ? cur.at(i - 1, j) : 0.0;
        const double right = i < nx ? cur.at(i, j) : 0.0;
        flux_x[j * (nx + 1) + i] = u > 0.0 ? u * left : u * right;
      }
    }
    for (std::size_t j = 0; j <= ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double u = fy[j * nx + i];
        const double below = j > 0 ? cur.at(i, j - 1) : 0.0;
        const double above = j < ny ? cur.at(i, j) : 0.0;
        flux_y[j * nx + i] = u > 0.0 ? u * below : u * above;
      }
    }
    double boundary = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      boundary += flux_x[j * (nx + 1) + nx] - flux_x[j * (nx + 1)];
    }
    for (std::size_t i = 0; i < nx; ++i) boundary += flux_y[ny * nx + i] - flux_y[i];
    res.outflow += boundary * tau * h;
    const double lam = tau / h;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        cur.at(i, j) -= lam * (flux_x[j * (nx + 1) + i + 1] - flux_x[j * (nx + 1) + i] + flux_y[(j + 1) * nx + i] -
                               flux_y[j * nx + i]);
      }
    }
    t = step + 1 == n_steps ? T : t + dt;
    ++res.steps;
    if (record_every > 0 && (step + 1) % record_every == 0 && step + 1 != n_steps) {
      res.times.push_back(t);
      res.frames.push_back(cur);
    }
  }
  if (n_steps > 0) {
    res.times.push_back(T);
    res.frames.push_back(std::move(cur));
  }
  return res;
}

}  // namespace osgflow
