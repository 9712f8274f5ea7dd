#pragma once

// Measure-valued solutions of d/dt mu_t + div(V_t mu_t) = 0: transport by
// the flow, weak-form residuals, the transported-flux integral and the renormalization check.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "osgflow/field.hpp"
#include "osgflow/flow.hpp"
#include "osgflow/measure.hpp"

namespace osgflow {

struct MeasureTrajectory {
  std::vector<double> times;
  std::vector<SignedParticleMeasure> snapshots;
  double mass_bound = 0.0;  // sup_t TV(mu_t)
  /// True when no snapshot merged atoms; atom i of every snapshot is then
  /// the image of atom i of the first one.
  bool merge_free = true;
  /// Accumulated flow error estimates and certified radii, per snapshot.
  std::vector<double> error_estimate;
  std::vector<double> certified_radius;

  void validate() const {
    if (times.size() != snapshots.size()) throw std::invalid_argument("trajectory needs one snapshot per time");
    for (std::size_t k = 1; k < times.size(); ++k) {
      if (!(times[k] > times[k - 1])) throw std::invalid_argument("trajectory times must increase strictly");
    }
  }
};

/// Builds a trajectory from explicit snapshots (used for synthetic inputs).
inline MeasureTrajectory make_trajectory(std::vector<double> times, std::vector<SignedParticleMeasure> snapshots) {
  MeasureTrajectory traj;
  traj.times = std::move(times);
  traj.snapshots = std::move(snapshots);
  traj.validate();
  for (const auto& s : traj.snapshots) {
    traj.mass_bound = std::max(traj.mass_bound, s.total_variation());
    if (s.merged_count() > 0 || s.pruned_count() > 0) traj.merge_free = false;
  }
  if (!traj.snapshots.empty()) {
    for (const auto& s : traj.snapshots) {
      if (s.size() != traj.snapshots.front().size()) traj.merge_free = false;
    }
  }
  traj.error_estimate.assign(traj.times.size(), 0.0);
  traj.certified_radius.assign(traj.times.size(), 0.0);
  return traj;
}

class TransportError : public std::runtime_error {
 public:
  TransportError(std::size_t atom, double time, const std::string& why)
      : std::runtime_error("transport failed for atom " + std::to_string(atom) + " at t=" + std::to_string(time) +
                           ": " + why),
        atom_(atom),
        time_(time) {}
  std::size_t atom() const noexcept { return atom_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t atom_;
  double time_;
};

/// mu_t = X(0, t, .)# mu_0 on the given times. Each atom is carried along
/// the time grid segment by segment; the snapshot at t = 0 is mu_0 itself.
inline MeasureTrajectory transport_solution(const SignedParticleMeasure& mu0, const VelocityField& field,
                                            const OsgoodCertificate& cert, const std::vector<double>& times,
                                            const StepController& ctrl = {}) {
  if (mu0.dim() != field.dim()) throw std::invalid_argument("measure and field dimensions differ");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < 0.0 || times[k] > field.horizon() * (1.0 + 1e-12)) {
      throw std::domain_error("transport time outside [0, T]");
    }
    if (k > 0 && !(times[k] > times[k - 1])) throw std::invalid_argument("transport times must increase strictly");
  }
  MeasureTrajectory traj;
  traj.times = times;
  const std::size_t n = mu0.size();
  std::vector<Point> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = mu0[i].position;
  std::vector<double> err(n, 0.0);
  double t_prev = 0.0;
  for (double t : times) {
    double worst_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (t == t_prev) continue;
      try {
        FlowResult r = integrate_flow(field, cert, t_prev, t, pos[i], ctrl);
        pos[i] = std::move(r.point);
        err[i] += r.local_error_estimate;
      } catch (const IntegrationError& e) {
        throw TransportError(i, t, e.what());
      }
    }
    for (double e : err) worst_err = std::max(worst_err, e);
    std::vector<Atom> atoms(n);
    for (std::size_t i = 0; i < n; ++i) atoms[i] = {pos[i], mu0[i].weight};
    SignedParticleMeasure snap = t == 0.0 ? mu0 : SignedParticleMeasure(mu0.dim(), std::move(atoms));
    if (snap.size() != n) traj.merge_free = false;
    traj.mass_bound = std::max(traj.mass_bound, snap.total_variation());
    traj.snapshots.push_back(std::move(snap));
    traj.error_estimate.push_back(worst_err);
    traj.certified_radius.push_back(certified_radius(cert, worst_err, 0.0, t));
    t_prev = t;
  }
  return traj;
}

struct ResidualReport {
  /// Per test function: max over time nodes of |D_t <phi, mu_t> - <V_t . grad phi, mu_t>|.
  std::vector<double> residual;
  /// Same, restricted to interior nodes (central differences only).
  std::vector<double> interior_residual;
  double max_spacing = 0.0;

  double max() const {
    double m = 0.0;
    for (double r : residual) m = std::max(m, r);
    return m;
  }
};

/// Weak-form residual of a trajectory. The time derivative of
/// F(t) = <phi, mu_t> uses central differences at interior nodes and
/// one-sided differences at the two end nodes; it is compared with
/// G(t) = <V_t . grad phi, mu_t> at the same node. The end nodes make the
/// reported maximum first order in the time step.
inline ResidualReport weak_residual(const MeasureTrajectory& traj, const VelocityField& field,
                                    const std::vector<TestFunction>& bank) {
  traj.validate();
  const std::size_t m = traj.times.size();
  if (m < 2) throw std::invalid_argument("weak_residual needs at least two times");
  ResidualReport rep;
  for (std::size_t k = 1; k < m; ++k) rep.max_spacing = std::max(rep.max_spacing, traj.times[k] - traj.times[k - 1]);
  std::vector<double> F(m), G(m);
  for (const TestFunction& phi : bank) {
    for (std::size_t k = 0; k < m; ++k) {
      F[k] = pair(traj.snapshots[k], phi);
      G[k] = pair_gradient(traj.snapshots[k], phi, field, traj.times[k]);
    }
    double worst = 0.0, worst_interior = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t lo = k == 0 ? 0 : k - 1;
      const std::size_t hi = k + 1 == m ? k : k + 1;
      const double deriv = (F[hi] - F[lo]) / (traj.times[hi] - traj.times[lo]);
      const double r = std::abs(deriv - G[k]);
      worst = std::max(worst, r);
      if (k > 0 && k + 1 < m) worst_interior = std::max(worst_interior, r);
    }
    rep.residual.push_back(worst);
    rep.interior_residual.push_back(worst_interior);
  }
  return rep;
}

/// Trapezoid rule in time of sum_i |w_i| |V(t, x_i)|.
inline double flux_integral(const MeasureTrajectory& traj, const VelocityField& field) {
  traj.validate();
  const std::size_t m = traj.times.size();
  std::vector<double> integrand(m, 0.0);
  Point v(field.dim());
  for (std::size_t k = 0; k < m; ++k) {
    for (const Atom& a : traj.snapshots[k].atoms()) {
      field.eval(traj.times[k], a.position, v);
      integrand[k] += std::abs(a.weight) * norm(v);
    }
  }
  double total = 0.0;
  for (std::size_t k = 1; k < m; ++k) total += 0.5 * (integrand[k] + integrand[k - 1]) * (traj.times[k] - traj.times[k - 1]);
  return total;
}

struct RenormalizationReport {
  ResidualReport full;
  ResidualReport positive;
  ResidualReport negative;
};

/// Weak residuals of t -> mu_t, t -> mu_t+ and t -> mu_t-, with Jordan parts
/// taken per snapshot.
inline RenormalizationReport renormalization_check(const MeasureTrajectory& traj, const VelocityField& field,
                                                   const std::vector<TestFunction>& bank) {
  traj.validate();
  std::vector<SignedParticleMeasure> pos, neg;
  for (const auto& s : traj.snapshots) {
    JordanParts parts = jordan_decompose(s);
    pos.push_back(std::move(parts.positive));
    neg.push_back(std::move(parts.negative));
  }
  RenormalizationReport rep;
  rep.full = weak_residual(traj, field, bank);
  rep.positive = weak_residual(make_trajectory(traj.times, std::move(pos)), field, bank);
  rep.negative = weak_residual(make_trajectory(traj.times, std::move(neg)), field, bank);
  return rep;
}

/// Bumps of the given radius centred on a uniform n^d lattice over [lo, hi]^d.
inline std::vector<TestFunction> bump_bank(std::size_t dim, std::size_t per_axis, double lo, double hi, double radius) {
  std::vector<TestFunction> bank;
  std::vector<std::size_t> idx(dim, 0);
  while (true) {
    Point c(dim);
    for (std::size_t a = 0; a < dim; ++a) {
      c[a] = per_axis == 1 ? 0.5 * (lo + hi)
                           : lo + (hi - lo) * static_cast<double>(idx[a]) / static_cast<double>(per_axis - 1);
    }
    bank.emplace_back(std::move(c), radius);
    std::size_t a = 0;
    while (a < dim && ++idx[a] == per_axis) idx[a++] = 0;
    if (a == dim) break;
  }
  return bank;
}

}  // namespace osgflow
