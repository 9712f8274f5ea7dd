// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "osgflow/current.hpp"
#include "osgflow/flat_distance.hpp"
#include "osgflow/flow.hpp"
#include "osgflow/modulus.hpp"
#include "osgflow/pde.hpp"
#include "osgflow/random.hpp"
#include "osgflow/xval.hpp"
#include "support/currents.hpp"
#include "support/decomposition_oracle.hpp"

using namespace osgflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> uniform_times(double T, std::size_t n) {
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(n);
  return t;
}

SignedParticleMeasure random_signed(std::size_t n, std::uint64_t seed, double radius) {
  SplitMix64 rng(seed);
  std::vector<Atom> atoms;
  for (std::size_t k = 0; k < n; ++k) {
    atoms.push_back({rng.in_ball(2, radius), (k % 3 == 0 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5)});
  }
  return SignedParticleMeasure(2, atoms);
}

Outcome envelope_exactness() {
  const Envelope e = separation_envelope(Modulus::log_lipschitz(), std::exp(-3.0), std::numbers::ln2);
  const double eu = std::abs(e.upper / std::exp(-1.0) - 1.0);
  const double el = std::abs(e.lower / std::exp(-7.0) - 1.0);
  return {eu <= 1e-10 && el <= 1e-10, "rel err upper " + fmt("%.2e", eu) + ", lower " + fmt("%.2e", el)};
}

Outcome analytic_flow() {
  const BuiltinField rad = make_builtin("radial_loglip", 1);
  const double x0 = std::exp(-3.0), t = std::numbers::ln2;
  const double exact = std::exp(1.0 - (1.0 - std::log(x0)) * std::exp(-t));
  const double e1 = std::abs(integrate_flow(rad.field, rad.certificate, 0.0, t, Point{x0}).point[0] - exact);
  const BuiltinField rot = make_builtin("rotation");
  const Point home{1.0, 0.0};
  const double e2 = distance(integrate_flow(rot.field, rot.certificate, 0.0, 2.0 * std::numbers::pi, home).point, home);
  return {e1 <= 1e-8 && e2 <= 1e-7, "loglip err " + fmt("%.2e", e1) + ", rotation period err " + fmt("%.2e", e2)};
}

Outcome two_sided_separation() {
  const BuiltinField b = make_builtin("radial_loglip", 2);
  PairSampler sampler(2, 1.0, 0.5, 1e-6, 0.5, 20240601);
  std::size_t violations = 0, checks = 0, unbounded = 0;
  double worst_margin = -kInfinity;
  for (int k = 0; k < 1000; ++k) {
    const PairSample s = sampler.next();
    const double d0 = distance(s.x, s.y);
    for (double t : {0.25, 0.5, 1.0}) {
      const FlowResult fx = integrate_flow(b.field, b.certificate, 0.0, t, s.x);
      const FlowResult fy = integrate_flow(b.field, b.certificate, 0.0, t, s.y);
      const double d = distance(fx.point, fy.point);
      const double slack = 2.0 * std::max(fx.certified_radius, fy.certified_radius);
      const Envelope e = separation_envelope(b.certificate.modulus, d0, b.certificate.C.integral(0.0, t));
      // upper == 1 means the bound left [0, 1), where rho is infinite: no upper control.
      const bool saturated = e.upper >= 1.0;
      if (saturated) ++unbounded;
      const double margin = std::max(e.lower - slack - d, saturated ? -kInfinity : d - e.upper - slack);
      worst_margin = std::max(worst_margin, margin);
      if (margin > 0.0) ++violations;
      ++checks;
    }
  }
  return {violations == 0, std::to_string(checks) + " checks, " + std::to_string(violations) +
                               " violations, " + std::to_string(unbounded) +
                               " with saturated upper bound, worst margin " + fmt("%.3e", worst_margin)};
}

Outcome flow_residuals() {
  double worst = 0.0;
  for (const char* name : {"rotation", "radial_loglip"}) {
    const BuiltinField b = make_builtin(name, 2);
    const double T = b.field.horizon();
    SplitMix64 rng(404);
    for (int k = 0; k < 100; ++k) {
      const double t1 = rng.uniform(0.0, T), t2 = rng.uniform(0.0, T), t3 = rng.uniform(0.0, T);
      const Point x = rng.in_ball(2, 0.9);
      worst = std::max(worst, semigroup_residual(b.field, b.certificate, t1, t2, t3, x));
      worst = std::max(worst, inverse_residual(b.field, b.certificate, t1, t2, x));
    }
  }
  return {worst <= 1e-6, "max residual " + fmt("%.2e", worst)};
}

struct RefinementRuns {
  std::vector<RenormalizationReport> reports;
  bool tv_exact = true;
  bool merge_free = true;
};

RefinementRuns refinement_runs() {
  const BuiltinField b = make_builtin("rotation");
  const SignedParticleMeasure mu0 = random_signed(10, 10, 0.9);
  // Ten bumps: a 3 x 3 lattice plus one centred bump.
  std::vector<TestFunction> bank = bump_bank(2, 3, -0.8, 0.8, 0.9);
  bank.emplace_back(Point{0.1, 0.2}, 1.2);
  RefinementRuns runs;
  for (std::size_t n : {10u, 20u, 40u, 80u}) {
    const MeasureTrajectory traj = transport_solution(mu0, b.field, b.certificate, uniform_times(1.0, n));
    runs.merge_free = runs.merge_free && traj.merge_free;
    for (const auto& s : traj.snapshots) runs.tv_exact = runs.tv_exact && s.total_variation() == mu0.total_variation();
    runs.reports.push_back(renormalization_check(traj, b.field, bank));
  }
  return runs;
}

std::string ratios(const RefinementRuns& runs, const ResidualReport RenormalizationReport::*part, bool& ok) {
  std::string out;
  for (std::size_t k = 1; k < runs.reports.size(); ++k) {
    const double r = (runs.reports[k - 1].*part).max() / (runs.reports[k].*part).max();
    ok = ok && r >= 1.7 && r <= 2.3;
    out += (k > 1 ? " " : "") + fmt("%.3f", r);
  }
  return out;
}

Outcome weak_residual_convergence(const RefinementRuns& runs) {
  bool ok = true;
  const std::string r = ratios(runs, &RenormalizationReport::full, ok);
  return {ok, "ratios " + r};
}

Outcome renormalization(const RefinementRuns& runs) {
  bool ok = runs.tv_exact && runs.merge_free;
  const std::string rp = ratios(runs, &RenormalizationReport::positive, ok);
  const std::string rn = ratios(runs, &RenormalizationReport::negative, ok);
  return {ok, "mu+ ratios " + rp + "; mu- ratios " + rn + "; TV exact " + (runs.tv_exact ? "yes" : "no")};
}

Outcome decomposition_exactness() {
  const auto start = std::chrono::steady_clock::now();
  const BuiltinField b = make_builtin("rotation");
  const SignedParticleMeasure mu0 = random_signed(100, 77, 0.9);
  const MeasureTrajectory traj = transport_solution(mu0, b.field, b.certificate, uniform_times(1.0, 100));
  const auto cur = discretize_trajectory<ExactMass>(traj, b.field);
  const auto dec = smirnov_decompose(cur);
  const auto rep = verify_no_cancellation(cur, dec.cycle_part, dec.curves);
  const auto split = split_monotone(dec.curves, cur.graph);
  const auto bm = reconstruct_boundary(split, cur.graph);
  const double d0 = flat_distance(bm.initial, traj.snapshots.front(), 1.0);
  const double dS = flat_distance(bm.final, traj.snapshots.back(), 1.0);
  // Exact weights at t = 0 against the input weights.
  bool exact_weights = bm.initial_exact.size() == mu0.size();
  for (const auto& [node, w] : bm.initial_exact) exact_weights = exact_weights && w == ExactMass(mu0[node].weight);

  const auto fcur = discretize_trajectory<double>(traj, b.field);
  const auto fdec = smirnov_decompose(fcur);
  const auto fbm = reconstruct_boundary(split_monotone(fdec.curves, fcur.graph), fcur.graph);
  const double f0 = flat_distance(fbm.initial, traj.snapshots.front(), 1.0);
  const double fS = flat_distance(fbm.final, traj.snapshots.back(), 1.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = cur.graph.edges().size() == 10000 && rep.exact_zero() && split.mixed.paths.empty() && d0 == 0.0 &&
                  dS == 0.0 && exact_weights && f0 <= 1e-9 && fS <= 1e-9 && secs < 60.0;
  return {ok, std::to_string(cur.graph.edges().size()) + " edges, defects " + (rep.exact_zero() ? "exactly 0" : "nonzero") +
                  ", exact flat " + fmt("%g", std::max(d0, dS)) + ", float flat " + fmt("%.2e", std::max(f0, fS)) + ", " +
                  fmt("%.2f s", secs)};
}

Outcome oracle_equivalence() {
  const auto corpus = oracle::corpus(240, 12, 3, 8675309);
  std::size_t agree = 0, max_edges = 0;
  for (const auto& g : corpus) {
    max_edges = std::max(max_edges, g.edges.size());
    const auto cur = testing_support::from_small<ExactMass>(g);
    const auto dec = smirnov_decompose(cur);
    if (!verify_no_cancellation(cur, dec.cycle_part, dec.curves).exact_zero()) continue;
    std::vector<int> starts(g.nodes, 0), ends(g.nodes, 0);
    for (const auto& p : dec.curves.paths) {
      starts[p.nodes.front()] += p.weight.convert_to<int>();
      ends[p.nodes.back()] += p.weight.convert_to<int>();
    }
    const auto marg = oracle::all_marginals(g, 4);
    if (marg.count({starts, ends})) ++agree;
  }
  return {agree == corpus.size() && corpus.size() >= 200,
          std::to_string(agree) + "/" + std::to_string(corpus.size()) + " instances agree (max " +
              std::to_string(max_edges) + " edges)"};
}

Outcome cross_validation() {
  const auto start = std::chrono::steady_clock::now();
  const BuiltinField b = make_builtin("rotation");
  const auto rows = cross_validate(b.field, b.certificate, CrossValidationConfig{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = rows.size() == 3 && secs < 300.0;
  std::string detail = "distances";
  for (const auto& r : rows) detail += " " + fmt("%.4e", r.flat_distance);
  detail += ", ratios";
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ok = ok && rows[k].ratio >= 1.6;
    detail += " " + fmt("%.3f", rows[k].ratio);
  }
  return {ok, detail + ", " + fmt("%.1f s", secs)};
}

Outcome sign_convention() {
  const BuiltinField b = make_builtin("constant", 1, 1.0);
  const Point a{-0.5}, c{0.25};
  const SignedParticleMeasure mu0(1, {{a, 1.0}, {c, -1.0}});
  const MeasureTrajectory traj = transport_solution(mu0, b.field, b.certificate, {0.0, 0.5, 1.0});
  const auto cur = discretize_trajectory<ExactMass>(traj, b.field);
  const auto bm = reconstruct_boundary(split_monotone(smirnov_decompose(cur).curves, cur.graph), cur.graph);
  bool ok = bm.initial_exact.size() == 2;
  for (const auto& [node, w] : bm.initial_exact) {
    const bool at_a = cur.graph.node(node).position == a;
    ok = ok && w == (at_a ? ExactMass(1) : ExactMass(-1)) && cur.graph.node(node).time == 0.0;
  }
  ok = ok && flat_distance(bm.initial, mu0, 1.0) == 0.0;
  return {ok, "mu0 = (B_i)#(nu+ - nu-) reproduces delta_a - delta_b"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int id, const char* name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  report(1, "envelope exactness", envelope_exactness);
  report(2, "analytic flow accuracy", analytic_flow);
  report(3, "two-sided separation", two_sided_separation);
  report(4, "semigroup and inverse residuals", flow_residuals);
  RefinementRuns runs;
  report(5, "weak residual convergence", [&runs] {
    runs = refinement_runs();
    return weak_residual_convergence(runs);
  });
  report(6, "renormalization", [&runs] { return renormalization(runs); });
  report(7, "decomposition exactness", decomposition_exactness);
  report(8, "oracle equivalence", oracle_equivalence);
  report(9, "cross-validation", cross_validation);
  report(10, "sign convention", sign_convention);
  return failures == 0 ? 0 : 1;
}
