// Command-line runner: one subcommand per invocation, all results buffered
// in memory and written only after the computation succeeded.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osgflow/current.hpp"
#include "osgflow/field.hpp"
#include "osgflow/flat_distance.hpp"
#include "osgflow/flow.hpp"
#include "osgflow/io.hpp"
#include "osgflow/measure.hpp"
#include "osgflow/modulus.hpp"
#include "osgflow/pde.hpp"
#include "osgflow/xval.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace osgflow;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitWarning = 4;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& why)
      : std::runtime_error((line > 0 ? "config line " + std::to_string(line) + ": " : "config: ") + why) {}
};

struct Options {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool exact = false;
  bool strict = false;
  std::string out;
  std::optional<double> tol;
  // Overrides of config keys.
  std::string field, measure, points, trajectory, current, modulus;
  std::optional<double> s, t, d0, budget;
  std::string times;
};

// Config document plus its source text for line lookup.
struct Config {
  json doc = json::object();
  std::string text;
  fs::path base = fs::current_path();

  std::size_t line_of(const std::string& key) const {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  bool has(const std::string& key) const { return doc.contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const { throw ConfigError(line_of(key), why); }

  double number(const json& j, const std::string& key) const {
    if (!j.is_number()) fail(key, "'" + key + "' must be a number");
    return j.get<double>();
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(key, "missing required key '" + key + "'");
    }
    return number(doc[key], key);
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(key, "missing required key '" + key + "'");
    }
    if (!doc[key].is_string()) fail(key, "'" + key + "' must be a string");
    return doc[key].get<std::string>();
  }

  std::string path(const std::string& key) const {
    const fs::path p = string(key);
    const fs::path full = p.is_absolute() ? p : base / p;
    if (!fs::exists(full)) fail(key, "'" + key + "' refers to a missing path: " + full.string());
    return full.string();
  }
};

Config load_config(const Options& opt) {
  Config cfg;
  if (opt.config_path.empty()) return cfg;
  try {
    cfg.text = read_text(opt.config_path);
  } catch (const std::exception& e) {
    throw ConfigError(0, e.what());
  }
  cfg.base = fs::absolute(opt.config_path).parent_path();
  try {
    cfg.doc = json::parse(cfg.text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, cfg.text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(cfg.text.begin(), cfg.text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ConfigError(line, std::string("syntax error: ") + e.what());
  }
  if (!cfg.doc.is_object()) throw ConfigError(1, "config must be a JSON object");
  return cfg;
}

void apply_overrides(Config& cfg, const Options& opt) {
  auto set_path = [&](const char* key, const std::string& v) {
    if (v.empty()) return;
    cfg.doc[key] = fs::absolute(v).string();
  };
  if (!opt.field.empty()) {
    if (cfg.has("field") && cfg.doc["field"].is_object()) {
      cfg.doc["field"]["name"] = opt.field;
    } else {
      cfg.doc["field"] = opt.field;
    }
  }
  set_path("measure", opt.measure);
  set_path("points", opt.points);
  set_path("trajectory", opt.trajectory);
  set_path("current", opt.current);
  if (!opt.modulus.empty()) cfg.doc["modulus"] = opt.modulus;
  if (opt.s) cfg.doc["s"] = *opt.s;
  if (opt.t) cfg.doc["t"] = *opt.t;
  if (opt.d0) cfg.doc["d0"] = *opt.d0;
  if (opt.budget) cfg.doc["budget"] = *opt.budget;
  if (!opt.times.empty()) {
    json arr = json::array();
    for (const auto& tok : detail::split_fields(opt.times, ',')) {
      try {
        arr.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError(0, "--times: not a number '" + tok + "'");
      }
    }
    cfg.doc["times"] = arr;
  }
  if (opt.seed_given) cfg.doc["seed"] = opt.seed;
}

PiecewiseConstant parse_profile(const Config& cfg, const json& j, const std::string& key, double horizon) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!(v >= 0.0)) cfg.fail(key, "'" + key + "' must be nonnegative");
    return PiecewiseConstant::constant(v, horizon);
  }
  if (!j.is_object() || !j.contains("breaks") || !j.contains("values")) {
    cfg.fail(key, "'" + key + "' must be a number or {\"breaks\": [...], \"values\": [...]}");
  }
  try {
    return PiecewiseConstant(j["breaks"].get<std::vector<double>>(), j["values"].get<std::vector<double>>());
  } catch (const std::exception& e) {
    cfg.fail(key, "'" + key + "': " + e.what());
  }
}

struct FieldSetup {
  VelocityField field;
  OsgoodCertificate cert;
  bool osgood_holds = true;
  double bound_radius = kInfinity;
};

FieldSetup load_field(const Config& cfg) {
  if (!cfg.has("field")) cfg.fail("field", "missing required key 'field'");
  const json& f = cfg.doc["field"];
  std::string name;
  std::size_t dim = 2;
  double horizon = 0.0;
  Point velocity;
  std::string file;
  if (f.is_string()) {
    name = f.get<std::string>();
  } else if (f.is_object()) {
    if (!f.contains("name") || !f["name"].is_string()) cfg.fail("field", "field needs a string 'name'");
    name = f["name"].get<std::string>();
    if (f.contains("dim")) {
      if (!f["dim"].is_number_unsigned() || f["dim"].get<std::size_t>() == 0) cfg.fail("dim", "'dim' must be a positive integer");
      dim = f["dim"].get<std::size_t>();
    }
    if (f.contains("horizon")) horizon = cfg.number(f["horizon"], "horizon");
    if (f.contains("velocity")) {
      try {
        velocity = f["velocity"].get<Point>();
      } catch (const std::exception&) {
        cfg.fail("velocity", "'velocity' must be an array of numbers");
      }
      dim = velocity.size();
    }
    if (f.contains("file")) {
      if (!f["file"].is_string()) cfg.fail("file", "'file' must be a string");
      const fs::path p = f["file"].get<std::string>();
      file = (p.is_absolute() ? p : cfg.base / p).string();
    }
  } else {
    cfg.fail("field", "'field' must be a name or an object");
  }
  if ((name == "radial_loglip" || name == "sign") && f.is_string()) dim = 1;
  if (name == "sign") dim = 1;

  FieldSetup out{zero_field(1), {}, true, kInfinity};
  if (name == "tabulated") {
    if (file.empty()) cfg.fail("field", "tabulated field needs 'file'");
    TabulatedGrid grid;
    try {
      grid = parse_tabulated_field(read_text(file), file);
    } catch (const std::exception& e) {
      cfg.fail("file", e.what());
    }
    out.field = tabulated_field(grid);
    out.osgood_holds = false;  // unknown until a certificate is declared
  } else {
    try {
      BuiltinField b = make_builtin(name, dim, horizon, velocity);
      out = {b.field, b.certificate, b.osgood_holds, b.bound_radius};
    } catch (const std::exception& e) {
      cfg.fail("field", e.what());
    }
  }
  const double T = out.field.horizon();
  if (cfg.has("certificate")) {
    const json& c = cfg.doc["certificate"];
    if (!c.is_object()) cfg.fail("certificate", "'certificate' must be an object");
    if (c.contains("modulus")) {
      if (!c["modulus"].is_string()) cfg.fail("modulus", "'modulus' must be a string");
      try {
        out.cert.modulus = Modulus::parse(c["modulus"].get<std::string>());
      } catch (const std::exception& e) {
        cfg.fail("modulus", e.what());
      }
    }
    if (c.contains("C")) out.cert.C = parse_profile(cfg, c["C"], "C", T);
    if (c.contains("D")) out.cert.D = parse_profile(cfg, c["D"], "D", T);
    out.osgood_holds = true;
  } else if (name == "tabulated") {
    cfg.fail("field", "a tabulated field needs a 'certificate'");
  }
  return out;
}

StepController load_controller(const Config& cfg, const Options& opt) {
  StepController ctrl;
  const double tol = opt.tol ? *opt.tol : cfg.number("tol", ctrl.rtol);
  if (!(tol > 0.0)) throw ConfigError(cfg.line_of("tol"), "tolerance must be positive");
  ctrl.rtol = tol;
  ctrl.atol = tol * 1e-2;
  if (cfg.has("fixed_step")) ctrl.fixed_step = cfg.number("fixed_step");
  if (!(ctrl.fixed_step > 0.0)) cfg.fail("fixed_step", "'fixed_step' must be positive");
  return ctrl;
}

std::vector<double> load_times(const Config& cfg) {
  if (!cfg.has("times")) cfg.fail("times", "missing required key 'times'");
  const json& j = cfg.doc["times"];
  std::vector<double> times;
  if (j.is_array()) {
    for (const auto& v : j) times.push_back(cfg.number(v, "times"));
  } else if (j.is_object() && j.contains("stop") && j.contains("count")) {
    const double start = j.contains("start") ? cfg.number(j["start"], "start") : 0.0;
    const double stop = cfg.number(j["stop"], "stop");
    if (!j["count"].is_number_unsigned() || j["count"].get<std::size_t>() < 2) cfg.fail("count", "'count' must be an integer >= 2");
    const auto n = j["count"].get<std::size_t>();
    for (std::size_t k = 0; k < n; ++k) {
      times.push_back(k + 1 == n ? stop : start + (stop - start) * static_cast<double>(k) / static_cast<double>(n - 1));
    }
  } else {
    cfg.fail("times", "'times' must be an array or {\"start\", \"stop\", \"count\"}");
  }
  if (times.empty()) cfg.fail("times", "'times' is empty");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) cfg.fail("times", "'times' must increase strictly");
  }
  return times;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Run {
  std::map<std::string, std::string> files;  // relative path -> content
  std::vector<std::string> warnings;
  std::string summary;                       // printed to stdout
};

std::string trajectory_file(std::size_t k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot_%04zu.csv", k);
  return buf;
}

struct LoadedTrajectory {
  MeasureTrajectory traj;
  std::vector<ExactMass> exact_first;  // weights of the first snapshot as written
};

LoadedTrajectory load_trajectory(const std::string& dir) {
  const std::string times_path = (fs::path(dir) / "times.csv").string();
  std::vector<double> times;
  for (const auto& p : parse_points_csv(read_text(times_path), times_path)) {
    if (p.size() != 2) throw FormatError(times_path, 0, "times.csv needs columns index,time");
    times.push_back(p[1]);
  }
  LoadedTrajectory out;
  std::vector<SignedParticleMeasure> snaps;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const std::string path = (fs::path(dir) / trajectory_file(k)).string();
    snaps.push_back(parse_measure_csv(read_text(path), path, k == 0 ? &out.exact_first : nullptr));
  }
  out.traj = make_trajectory(std::move(times), std::move(snaps));
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_envelope(const Config& cfg, Run& run) {
  Modulus m = Modulus::linear();
  try {
    m = Modulus::parse(cfg.string("modulus"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    cfg.fail("modulus", e.what());
  }
  auto list = [&](const std::string& key) {
    std::vector<double> v;
    if (cfg.has(key) && cfg.doc[key].is_array()) {
      for (const auto& x : cfg.doc[key]) v.push_back(cfg.number(x, key));
    } else {
      v.push_back(cfg.number(key));
    }
    return v;
  };
  const auto d0s = list("d0");
  const auto budgets = list("budget");
  std::string csv = "modulus,d0,budget,upper,lower\n";
  for (double d0 : d0s) {
    for (double b : budgets) {
      const Envelope e = separation_envelope(m, d0, b);
      csv += m.name() + "," + format_double(d0) + "," + format_double(b) + "," + format_double(e.upper) + "," +
             format_double(e.lower) + "\n";
    }
  }
  run.files["envelope.csv"] = csv;
  run.summary = csv;
}

void cmd_flow(const Config& cfg, const Options& opt, Run& run) {
  const FieldSetup fs_ = load_field(cfg);
  const StepController ctrl = load_controller(cfg, opt);
  const double s = cfg.number("s", 0.0);
  const double t = cfg.number("t");
  const std::string path = cfg.path("points");
  std::vector<Point> pts;
  try {
    pts = parse_points_csv(read_text(path), path);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.line_of("points"), e.what());
  }
  const std::size_t d = fs_.field.dim();
  std::string csv;
  for (std::size_t i = 0; i < d; ++i) csv += "x" + std::to_string(i) + ",";
  for (std::size_t i = 0; i < d; ++i) csv += "y" + std::to_string(i) + ",";
  csv += "error,certified_radius\n";
  const double tol = opt.tol.value_or(ctrl.rtol);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].size() != d) throw ConfigError(cfg.line_of("points"), "point " + std::to_string(k) + " has the wrong dimension");
    const FlowResult r = integrate_flow(fs_.field, fs_.cert, s, t, pts[k], ctrl);
    for (double c : pts[k]) csv += format_double(c) + ",";
    for (double c : r.point) csv += format_double(c) + ",";
    csv += format_double(r.local_error_estimate) + "," + format_double(r.certified_radius) + "\n";
    // The estimate sums per-step local errors, so it is compared against a
    // loose multiple of the per-step tolerance.
    if (r.local_error_estimate > 1e3 * tol * std::max(1.0, norm(r.point))) {
      run.warnings.push_back("point " + std::to_string(k) + ": error estimate above tolerance");
    }
  }
  if (!fs_.osgood_holds) run.warnings.push_back("field '" + fs_.field.name() + "' has no valid Osgood certificate");
  run.files["flow.csv"] = csv;
  run.summary = csv;
}

void cmd_transport(const Config& cfg, const Options& opt, Run& run) {
  const FieldSetup fs_ = load_field(cfg);
  const StepController ctrl = load_controller(cfg, opt);
  const std::vector<double> times = load_times(cfg);
  const std::string path = cfg.path("measure");
  SignedParticleMeasure mu0;
  try {
    mu0 = parse_measure_csv(read_text(path), path);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.line_of("measure"), e.what());
  }
  if (mu0.dim() != fs_.field.dim()) cfg.fail("measure", "measure dimension does not match the field");
  if (times.front() != 0.0) cfg.fail("times", "'times' must start at 0");
  const MeasureTrajectory traj = transport_solution(mu0, fs_.field, fs_.cert, times, ctrl);
  std::string tcsv = "index,time,error_estimate,certified_radius\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    tcsv += std::to_string(k) + "," + format_double(traj.times[k]) + "," + format_double(traj.error_estimate[k]) + "," +
            format_double(traj.certified_radius[k]) + "\n";
    run.files["trajectory/" + trajectory_file(k)] = write_measure_csv(traj.snapshots[k]);
  }
  // times.csv keeps two columns so it reads back as points.
  std::string times_csv = "index,time\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) times_csv += std::to_string(k) + "," + format_double(traj.times[k]) + "\n";
  run.files["trajectory/times.csv"] = times_csv;
  run.files["trajectory/errors.csv"] = tcsv;
  if (!traj.merge_free) run.warnings.push_back("atoms merged during transport");
  run.summary = write_measure_csv(traj.snapshots.back());
}

std::vector<TestFunction> load_bank(const Config& cfg, std::size_t dim) {
  std::size_t per_axis = 3;
  double lo = -1.0, hi = 1.0, radius = 0.75;
  if (cfg.has("bank")) {
    const json& b = cfg.doc["bank"];
    if (!b.is_object()) cfg.fail("bank", "'bank' must be an object");
    if (b.contains("per_axis")) {
      if (!b["per_axis"].is_number_unsigned() || b["per_axis"].get<std::size_t>() == 0) cfg.fail("per_axis", "'per_axis' must be a positive integer");
      per_axis = b["per_axis"].get<std::size_t>();
    }
    if (b.contains("lo")) lo = cfg.number(b["lo"], "lo");
    if (b.contains("hi")) hi = cfg.number(b["hi"], "hi");
    if (b.contains("radius")) radius = cfg.number(b["radius"], "radius");
  }
  if (!(radius > 0.0) || !(hi >= lo)) cfg.fail("bank", "bank needs radius > 0 and hi >= lo");
  return bump_bank(dim, per_axis, lo, hi, radius);
}

void cmd_residual(const Config& cfg, Run& run) {
  const FieldSetup fs_ = load_field(cfg);
  const std::string dir = cfg.path("trajectory");
  LoadedTrajectory lt;
  try {
    lt = load_trajectory(dir);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.line_of("trajectory"), e.what());
  }
  const auto bank = load_bank(cfg, fs_.field.dim());
  const RenormalizationReport rep = renormalization_check(lt.traj, fs_.field, bank);
  json out;
  out["residual"] = rep.full.residual;
  out["interior_residual"] = rep.full.interior_residual;
  out["max_residual"] = rep.full.max();
  out["max_spacing"] = rep.full.max_spacing;
  out["positive_max_residual"] = rep.positive.max();
  out["negative_max_residual"] = rep.negative.max();
  out["flux_integral"] = flux_integral(lt.traj, fs_.field);
  out["merge_free"] = lt.traj.merge_free;
  double tv0 = lt.traj.snapshots.front().total_variation(), tv_dev = 0.0;
  for (const auto& s : lt.traj.snapshots) tv_dev = std::max(tv_dev, std::abs(s.total_variation() - tv0));
  out["total_variation_drift"] = tv_dev;
  run.files["residual.json"] = out.dump(2) + "\n";
  run.summary = run.files["residual.json"];
}

template <typename Mass>
void decompose_current(const DiscreteCurrent<Mass>& cur, const std::optional<MeasureTrajectory>& traj,
                       const std::optional<FieldSetup>& fs_, const StepController& ctrl, double tol, Run& run) {
  using Traits = MassTraits<Mass>;
  const Decomposition<Mass> dec = smirnov_decompose(cur, MassTraits<Mass>::exact ? 0.0 : 1e-12);
  const NoCancellationReport<Mass> rep = verify_no_cancellation(cur, dec.cycle_part, dec.curves);
  for (const auto& w : dec.warnings) run.warnings.push_back(w);
  json out;
  out["exact"] = Traits::exact;
  out["paths"] = dec.curves.paths.size();
  out["edge_defect"] = format_mass(rep.edge_defect);
  out["boundary_defect"] = format_mass(rep.boundary_defect);
  out["orientation_violations"] = rep.orientation_violations;
  out["non_simple_paths"] = rep.non_simple_paths;
  out["cycle_divergence"] = format_mass(rep.cycle_divergence);
  out["negative_cycle_mass"] = format_mass(rep.negative_cycle_mass);
  out["orientation_defect"] = cur.orientation_defect;
  const bool ok = Traits::exact ? rep.exact_zero() : rep.worst() <= tol;
  if (!ok) run.warnings.push_back("no-cancellation defects above tolerance");
  const MonotoneSplit<Mass> split = split_monotone(dec.curves, cur.graph);
  out["increasing_paths"] = split.increasing.paths.size();
  out["decreasing_paths"] = split.decreasing.paths.size();
  out["mixed_paths"] = split.mixed.paths.size();
  if (split.mixed.paths.empty()) {
    const BoundaryMeasures<Mass> bm = reconstruct_boundary(split, cur.graph);
    run.files["boundary_initial.csv"] = write_measure_csv(bm.initial);
    run.files["boundary_final.csv"] = write_measure_csv(bm.final);
    if (traj) {
      const double d0 = flat_distance(bm.initial, traj->snapshots.front(), 1.0,
                                      std::max(kDefaultFlatAtomLimit, traj->snapshots.front().size()));
      const double dS = flat_distance(bm.final, traj->snapshots.back(), 1.0,
                                      std::max(kDefaultFlatAtomLimit, traj->snapshots.back().size()));
      out["initial_flat_distance"] = d0;
      out["final_flat_distance"] = dS;
      if (d0 > tol || dS > tol) run.warnings.push_back("reconstructed boundary differs from the trajectory endpoints");
      if (fs_) {
        out["boundary_transport_defect"] = boundary_transport_defect(bm.initial, bm.final, fs_->field, fs_->cert,
                                                                     traj->times.front(), traj->times.back(), 1.0, ctrl);
      }
    }
  } else {
    run.warnings.push_back("mixed paths present; boundary not reconstructed");
  }
  run.files["decomposition.txt"] = write_decomposition(dec);
  run.files["decomposition.json"] = out.dump(2) + "\n";
  run.summary = run.files["decomposition.txt"];
}

template <typename Mass>
void cmd_decompose_typed(const Config& cfg, const Options& opt, Run& run) {
  const StepController ctrl = load_controller(cfg, opt);
  const double tol = opt.tol.value_or(cfg.number("tol", 1e-9));
  if (cfg.has("current")) {
    const std::string path = cfg.path("current");
    DiscreteCurrent<Mass> cur;
    try {
      cur = parse_current<Mass>(read_text(path), path);
    } catch (const std::exception& e) {
      throw ConfigError(cfg.line_of("current"), e.what());
    }
    decompose_current(cur, std::nullopt, std::nullopt, ctrl, tol, run);
    return;
  }
  const FieldSetup fs_ = load_field(cfg);
  const std::string dir = cfg.path("trajectory");
  LoadedTrajectory lt;
  try {
    lt = load_trajectory(dir);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.line_of("trajectory"), e.what());
  }
  DiscreteCurrent<Mass> cur = discretize_trajectory<Mass>(lt.traj, fs_.field);
  if constexpr (MassTraits<Mass>::exact) {
    // Use the weights exactly as written rather than their binary images.
    const std::size_t n = lt.exact_first.size();
    if (n == lt.traj.snapshots.front().size()) {
      for (std::size_t e = 0; e < cur.mass.size(); ++e) cur.mass[e] = MassTraits<Mass>::abs(lt.exact_first[e % n]);
    }
  }
  decompose_current(cur, std::optional<MeasureTrajectory>(lt.traj), std::optional<FieldSetup>(fs_), ctrl, tol, run);
}

void cmd_decompose(const Config& cfg, const Options& opt, Run& run) {
  if (!cfg.has("current") && !cfg.has("trajectory")) cfg.fail("current", "decompose needs 'current' or 'trajectory'");
  if (opt.exact) {
    cmd_decompose_typed<ExactMass>(cfg, opt, run);
  } else {
    cmd_decompose_typed<double>(cfg, opt, run);
  }
}

void cmd_xval(const Config& cfg, const Options& opt, Run& run) {
  CrossValidationConfig xc;
  const BuiltinField rotation = make_builtin("rotation");
  const FieldSetup fs_ = cfg.has("field") ? load_field(cfg) : FieldSetup{rotation.field, rotation.certificate, true, 1.0};
  if (fs_.field.dim() != 2) cfg.fail("field", "xval needs a 2D field");
  xc.ctrl = load_controller(cfg, opt);
  if (cfg.has("xval")) {
    const json& x = cfg.doc["xval"];
    if (!x.is_object()) cfg.fail("xval", "'xval' must be an object");
    if (x.contains("center")) {
      try {
        xc.center = x["center"].get<Point>();
      } catch (const std::exception&) {
        cfg.fail("center", "'center' must be an array of two numbers");
      }
      if (xc.center.size() != 2) cfg.fail("center", "'center' must have two entries");
    }
    if (x.contains("sigma")) xc.sigma = cfg.number(x["sigma"], "sigma");
    if (x.contains("final_time")) xc.final_time = cfg.number(x["final_time"], "final_time");
    if (x.contains("spacings")) {
      xc.spacings.clear();
      for (const auto& h : x["spacings"]) xc.spacings.push_back(cfg.number(h, "spacings"));
    }
    if (x.contains("domain_lo")) xc.domain_lo = cfg.number(x["domain_lo"], "domain_lo");
    if (x.contains("domain_hi")) xc.domain_hi = cfg.number(x["domain_hi"], "domain_hi");
    if (x.contains("particles_per_axis")) {
      if (!x["particles_per_axis"].is_number_unsigned()) cfg.fail("particles_per_axis", "'particles_per_axis' must be a positive integer");
      xc.particles_per_axis = x["particles_per_axis"].get<std::size_t>();
    }
    if (x.contains("cfl")) xc.cfl = cfg.number(x["cfl"], "cfl");
    if (x.contains("comparison_spacing")) xc.comparison_spacing = cfg.number(x["comparison_spacing"], "comparison_spacing");
  }
  if (!(xc.sigma > 0.0) || !(xc.cfl > 0.0 && xc.cfl <= 1.0) || xc.spacings.empty() || xc.particles_per_axis == 0 ||
      !(xc.domain_hi > xc.domain_lo) || !(xc.comparison_spacing > 0.0) || !(xc.final_time > 0.0)) {
    cfg.fail("xval", "xval needs sigma > 0, 0 < cfl <= 1, spacings, particles and a nonempty domain");
  }
  const auto rows = cross_validate(fs_.field, fs_.cert, xc);
  std::string csv = "h,dt,steps,grid_mass,outflow,flat_distance,ratio\n";
  for (const auto& r : rows) {
    csv += format_double(r.h) + "," + format_double(r.dt) + "," + std::to_string(r.steps) + "," +
           format_double(r.grid_mass) + "," + format_double(r.outflow) + "," + format_double(r.flat_distance) + "," +
           format_double(r.ratio) + "\n";
  }
  run.files["xval.csv"] = csv;
  run.summary = csv;
}

void cmd_checkfield(const Config& cfg, Run& run) {
  const FieldSetup fs_ = load_field(cfg);
  const auto seed = cfg.has("seed") ? cfg.doc["seed"].get<std::uint64_t>() : std::uint64_t{1};
  if (cfg.has("samples") && !cfg.doc["samples"].is_number_unsigned()) cfg.fail("samples", "'samples' must be a positive integer");
  const std::size_t n = cfg.has("samples") ? cfg.doc["samples"].get<std::size_t>() : 1000;
  const double radius = cfg.number("radius", std::isfinite(fs_.bound_radius) ? fs_.bound_radius : 1.0);
  const double min_sep = cfg.number("min_sep", 1e-6);
  const double max_sep = cfg.number("max_sep", 0.5);
  PairSampler sampler(fs_.field.dim(), fs_.field.horizon(), radius, min_sep, max_sep, seed);
  const ViolationReport o = check_osgood(fs_.field, fs_.cert, sampler, n);
  PairSampler sampler_b(fs_.field.dim(), fs_.field.horizon(), radius, min_sep, max_sep, seed + 1);
  const ViolationReport b = check_bound(fs_.field, fs_.cert, sampler_b, n);
  auto report = [](const ViolationReport& r) {
    json j;
    j["worst_ratio"] = std::isfinite(r.worst_ratio) ? json(r.worst_ratio) : json("inf");
    j["witness_t"] = r.witness_t;
    j["witness_x"] = r.witness_x;
    j["witness_y"] = r.witness_y;
    j["samples_checked"] = r.samples_checked;
    j["skipped"] = r.skipped;
    return j;
  };
  json out;
  out["field"] = fs_.field.name();
  out["modulus"] = fs_.cert.modulus.name();
  out["osgood"] = report(o);
  out["bound"] = report(b);
  out["certificate_refuted"] = o.worst_ratio > 1.0 || b.worst_ratio > 1.0;
  if (o.worst_ratio > 1.0) run.warnings.push_back("modulus condition violated by a sampled pair");
  if (b.worst_ratio > 1.0) run.warnings.push_back("velocity bound violated by a sample");
  run.files["checkfield.json"] = out.dump(2) + "\n";
  run.summary = run.files["checkfield.json"];
}

void write_outputs(const fs::path& out_dir, const Run& run, const json& manifest) {
  fs::create_directories(out_dir);
  for (const auto& [rel, content] : run.files) {
    const fs::path p = out_dir / rel;
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  }
  std::ofstream f(out_dir / "manifest.json", std::ios::binary);
  f << manifest.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport of signed measures by Osgood flows"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "RNG seed")->each([&opt](const std::string&) { opt.seed_given = true; });
    sub->add_flag("--exact", opt.exact, "Exact rational masses");
    sub->add_option("--out", opt.out, "Output directory (default $OSGFLOW_OUT or ./osgflow_out)");
    sub->add_option("--tol", opt.tol, "Tolerance");
    sub->add_flag("--strict", opt.strict, "Exit 4 on tolerance warnings");
    sub->add_option("--field", opt.field, "Field name");
    sub->add_option("--measure", opt.measure, "Measure CSV");
    sub->add_option("--points", opt.points, "Points CSV");
    sub->add_option("--trajectory", opt.trajectory, "Trajectory directory");
    sub->add_option("--current", opt.current, "Current file");
    sub->add_option("--modulus", opt.modulus, "Modulus: linear, loglip or power:ALPHA");
    sub->add_option("--s", opt.s, "Start time");
    sub->add_option("--t", opt.t, "End time");
    sub->add_option("--d0", opt.d0, "Initial separation");
    sub->add_option("--budget", opt.budget, "Budget int C");
    sub->add_option("--times", opt.times, "Comma separated time grid");
  };
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"flow", "Flow map X(s, t, x) of a list of points"},
      {"transport", "Push a measure along the flow on a time grid"},
      {"residual", "Weak-form residuals of a trajectory"},
      {"decompose", "Decompose a space-time current into paths and cycles"},
      {"envelope", "Osgood separation envelopes"},
      {"xval", "Particle versus upwind cross-validation"},
      {"checkfield", "Sample the modulus condition and velocity bound of a field"}};
  for (const auto& [name, help] : subs) add_common(app.add_subcommand(name, help));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  const auto start = std::chrono::steady_clock::now();
  Config cfg;
  Run run;
  try {
    cfg = load_config(opt);
    apply_overrides(cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << "osgflow " << command << ": " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    if (command == "envelope") {
      cmd_envelope(cfg, run);
    } else if (command == "flow") {
      cmd_flow(cfg, opt, run);
    } else if (command == "transport") {
      cmd_transport(cfg, opt, run);
    } else if (command == "residual") {
      cmd_residual(cfg, run);
    } else if (command == "decompose") {
      cmd_decompose(cfg, opt, run);
    } else if (command == "xval") {
      cmd_xval(cfg, opt, run);
    } else if (command == "checkfield") {
      cmd_checkfield(cfg, run);
    }
  } catch (const ConfigError& e) {
    std::cerr << "osgflow " << command << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "osgflow " << command << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "osgflow " << command << ": config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "osgflow " << command << ": numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::path out_dir = opt.out;
  if (out_dir.empty()) {
    const char* env = std::getenv("OSGFLOW_OUT");
    out_dir = env && *env ? env : "osgflow_out";
  }
  json manifest;
  manifest["command"] = command;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.has("seed") ? cfg.doc["seed"] : json(opt.seed);
  manifest["exact"] = opt.exact;
  manifest["config"] = cfg.doc;
  manifest["warnings"] = run.warnings;
  manifest["wall_time_s"] = wall;
  std::string all;
  json hashes = json::object();
  for (const auto& [rel, content] : run.files) {
    hashes[rel] = hex(fnv1a(content));
    all += rel + "\n" + content;
  }
  manifest["outputs"] = hashes;
  manifest["output_hash"] = hex(fnv1a(all));
  try {
    write_outputs(out_dir, run, manifest);
  } catch (const std::exception& e) {
    std::cerr << "osgflow " << command << ": " << e.what() << "\n";
    return kExitNumerical;
  }
  std::cout << run.summary;
  for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
  return opt.strict && !run.warnings.empty() ? kExitWarning : 0;
}
