#pragma once

// Text formats: measure and point CSV, tabulated fields, currents and
// decompositions. Readers report the offending line; writers print floats
// with 17 significant digits so every value round-trips.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "osgflow/current.hpp"
#include "osgflow/field.hpp"
#include "osgflow/measure.hpp"

namespace osgflow {

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& why)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + why), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_mass(double x) { return format_double(x); }
inline std::string format_mass(const ExactMass& x) { return x.str(); }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  if (sep == ' ') {
    while (ss >> cur) out.push_back(cur);
    return out;
  }
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& tok, const std::string& source, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != tok.size()) throw FormatError(source, line, "not a number: '" + tok + "'");
  if (!std::isfinite(v)) throw FormatError(source, line, "value is not finite: '" + tok + "'");
  return v;
}

inline std::size_t parse_index(const std::string& tok, const std::string& source, std::size_t line) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(source, line, "not an index: '" + tok + "'");
  }
  return std::stoull(tok);
}

// Non-empty, non-comment lines as (line number, content).
inline std::vector<std::pair<std::size_t, std::string>> content_lines(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::istringstream ss(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.emplace_back(n, t);
  }
  return out;
}

inline bool is_header(const std::vector<std::string>& fields) {
  for (const auto& f : fields) {
    if (!f.empty() && (std::isalpha(static_cast<unsigned char>(f[0])) || f[0] == '_')) return true;
  }
  return false;
}

}  // namespace detail

/// Rows "x_1,...,x_d,w". An optional first header line is skipped. When
/// `exact_weights` is given it receives the exact value of every weight
/// as written.
inline SignedParticleMeasure parse_measure_csv(const std::string& text, const std::string& source = "measure",
                                               std::vector<ExactMass>* exact_weights = nullptr) {
  std::vector<Atom> atoms;
  std::size_t dim = 0;
  bool first = true;
  for (const auto& [n, line] : detail::content_lines(text)) {
    const auto f = detail::split_fields(line, ',');
    if (first && detail::is_header(f)) {
      first = false;
      continue;
    }
    first = false;
    if (f.size() < 2) throw FormatError(source, n, "need at least one coordinate and a weight");
    if (dim == 0) dim = f.size() - 1;
    if (f.size() != dim + 1) throw FormatError(source, n, "expected " + std::to_string(dim + 1) + " columns");
    Atom a;
    for (std::size_t i = 0; i < dim; ++i) a.position.push_back(detail::parse_double(f[i], source, n));
    if (f[dim].find('/') == std::string::npos) {
      a.weight = detail::parse_double(f[dim], source, n);
    }
    if (exact_weights || f[dim].find('/') != std::string::npos) {
      ExactMass w;
      try {
        w = parse_exact(f[dim]);
      } catch (const std::exception& e) {
        throw FormatError(source, n, e.what());
      }
      // Rational weights "p/q" are rounded once to the nearest double.
      if (f[dim].find('/') != std::string::npos) a.weight = w.convert_to<double>();
      if (exact_weights) exact_weights->push_back(w);
    }
    if (a.weight == 0.0) throw FormatError(source, n, "atom weight is zero");
    atoms.push_back(std::move(a));
  }
  if (dim == 0) throw FormatError(source, 0, "measure file has no atoms");
  return SignedParticleMeasure(dim, std::move(atoms));
}

inline std::string write_measure_csv(const SignedParticleMeasure& mu) {
  std::string out;
  for (std::size_t i = 0; i < mu.dim(); ++i) out += "x" + std::to_string(i) + ",";
  out += "weight\n";
  for (const Atom& a : mu.atoms()) {
    for (double c : a.position) out += format_double(c) + ",";
    out += format_double(a.weight) + "\n";
  }
  return out;
}

inline std::vector<Point> parse_points_csv(const std::string& text, const std::string& source = "points") {
  std::vector<Point> pts;
  std::size_t dim = 0;
  bool first = true;
  for (const auto& [n, line] : detail::content_lines(text)) {
    const auto f = detail::split_fields(line, ',');
    if (first && detail::is_header(f)) {
      first = false;
      continue;
    }
    first = false;
    if (dim == 0) dim = f.size();
    if (f.size() != dim) throw FormatError(source, n, "expected " + std::to_string(dim) + " columns");
    Point p;
    for (const auto& tok : f) p.push_back(detail::parse_double(tok, source, n));
    pts.push_back(std::move(p));
  }
  if (pts.empty()) throw FormatError(source, 0, "points file is empty");
  return pts;
}

/// Tabulated field file:
///   dim D
///   horizon T
///   time N LO HI
///   axis N LO HI        (D lines)
///   data
///   v_1 ... v_D         (one row per node, row-major over (t, x_1, ..., x_D))
inline TabulatedGrid parse_tabulated_field(const std::string& text, const std::string& source = "field") {
  TabulatedGrid g;
  g.space.clear();
  bool have_dim = false, have_h = false, have_t = false, in_data = false;
  std::size_t data_line = 0;
  for (const auto& [n, line] : detail::content_lines(text)) {
    const auto f = detail::split_fields(line, ' ');
    if (in_data) {
      if (f.size() != g.dim) throw FormatError(source, n, "data row needs " + std::to_string(g.dim) + " values");
      for (const auto& tok : f) g.data.push_back(detail::parse_double(tok, source, n));
      continue;
    }
    const std::string& key = f[0];
    auto axis = [&](TabulatedGrid::Axis& a) {
      if (f.size() != 4) throw FormatError(source, n, key + " needs N LO HI");
      a.n = detail::parse_index(f[1], source, n);
      a.lo = detail::parse_double(f[2], source, n);
      a.hi = detail::parse_double(f[3], source, n);
      if (a.n < 1 || (a.n > 1 && !(a.hi > a.lo))) throw FormatError(source, n, "bad " + key + " axis");
    };
    if (key == "dim" && f.size() == 2) {
      g.dim = detail::parse_index(f[1], source, n);
      if (g.dim == 0) throw FormatError(source, n, "dim must be positive");
      have_dim = true;
    } else if (key == "horizon" && f.size() == 2) {
      g.horizon = detail::parse_double(f[1], source, n);
      if (!(g.horizon > 0.0)) throw FormatError(source, n, "horizon must be positive");
      have_h = true;
    } else if (key == "time") {
      axis(g.time);
      have_t = true;
    } else if (key == "axis") {
      g.space.emplace_back();
      axis(g.space.back());
    } else if (key == "data" && f.size() == 1) {
      if (!have_dim || !have_h || !have_t) throw FormatError(source, n, "data before dim, horizon and time");
      if (g.space.size() != g.dim) throw FormatError(source, n, "need one axis line per dimension");
      in_data = true;
      data_line = n;
    } else {
      throw FormatError(source, n, "unknown directive '" + key + "'");
    }
  }
  if (!in_data) throw FormatError(source, 0, "missing data section");
  if (g.data.size() != g.node_count() * g.dim) {
    throw FormatError(source, data_line,
                      "expected " + std::to_string(g.node_count()) + " data rows, got " +
                          std::to_string(g.data.size() / g.dim));
  }
  return g;
}

/// Current file:
///   dim D
///   nodes N
///   <index> <t> <x_1> ... <x_D>     (N lines, index = 0..N-1 in order)
///   edges E
///   <tail> <head> <mass>            (E lines)
/// Node slices are the ranks of the distinct times.
template <typename Mass>
DiscreteCurrent<Mass> parse_current(const std::string& text, const std::string& source = "current") {
  const auto lines = detail::content_lines(text);
  std::size_t k = 0;
  auto expect = [&](const std::string& key) -> std::size_t {
    if (k >= lines.size()) throw FormatError(source, lines.empty() ? 0 : lines.back().first, "missing '" + key + "'");
    const auto f = detail::split_fields(lines[k].second, ' ');
    if (f.size() != 2 || f[0] != key) throw FormatError(source, lines[k].first, "expected '" + key + " <count>'");
    const std::size_t v = detail::parse_index(f[1], source, lines[k].first);
    ++k;
    return v;
  };
  const std::size_t dim = expect("dim");
  if (dim == 0) throw FormatError(source, lines[0].first, "dim must be positive");
  const std::size_t n_nodes = expect("nodes");
  std::vector<double> times;
  std::vector<Point> pos;
  for (std::size_t i = 0; i < n_nodes; ++i, ++k) {
    if (k >= lines.size()) throw FormatError(source, lines.back().first, "missing node rows");
    const auto& [n, line] = lines[k];
    const auto f = detail::split_fields(line, ' ');
    if (f.size() != dim + 2) throw FormatError(source, n, "node row needs index, t and " + std::to_string(dim) + " coordinates");
    if (detail::parse_index(f[0], source, n) != i) throw FormatError(source, n, "node indices must be 0..N-1 in order");
    times.push_back(detail::parse_double(f[1], source, n));
    Point p;
    for (std::size_t c = 0; c < dim; ++c) p.push_back(detail::parse_double(f[c + 2], source, n));
    pos.push_back(std::move(p));
  }
  std::vector<double> distinct = times;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  DiscreteCurrent<Mass> cur{SpaceTimeGraph(dim), {}, 0.0};
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto slice = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), times[i]) - distinct.begin());
    cur.graph.add_node(slice, times[i], pos[i]);
  }
  const std::size_t n_edges = expect("edges");
  for (std::size_t i = 0; i < n_edges; ++i, ++k) {
    if (k >= lines.size()) throw FormatError(source, lines.back().first, "missing edge rows");
    const auto& [n, line] = lines[k];
    const auto f = detail::split_fields(line, ' ');
    if (f.size() != 3) throw FormatError(source, n, "edge row needs tail, head and mass");
    const std::size_t tail = detail::parse_index(f[0], source, n);
    const std::size_t head = detail::parse_index(f[1], source, n);
    if (tail >= n_nodes || head >= n_nodes) throw FormatError(source, n, "edge endpoint is not a node");
    Mass m;
    try {
      if constexpr (MassTraits<Mass>::exact) {
        m = parse_exact(f[2]);
      } else {
        m = detail::parse_double(f[2], source, n);
      }
      cur.graph.add_edge(tail, head);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(source, n, e.what());
    }
    if (m < 0) throw FormatError(source, n, "edge mass must be nonnegative");
    cur.mass.push_back(std::move(m));
  }
  if (k != lines.size()) throw FormatError(source, lines[k].first, "unexpected trailing content");
  return cur;
}

template <typename Mass>
std::string write_current(const DiscreteCurrent<Mass>& cur) {
  std::string out = "dim " + std::to_string(cur.graph.dim()) + "\nnodes " + std::to_string(cur.graph.nodes().size()) + "\n";
  for (std::size_t i = 0; i < cur.graph.nodes().size(); ++i) {
    const auto& nd = cur.graph.node(i);
    out += std::to_string(i) + " " + format_double(nd.time);
    for (double c : nd.position) out += " " + format_double(c);
    out += "\n";
  }
  out += "edges " + std::to_string(cur.graph.edges().size()) + "\n";
  for (std::size_t e = 0; e < cur.graph.edges().size(); ++e) {
    out += std::to_string(cur.graph.edge(e).tail) + " " + std::to_string(cur.graph.edge(e).head) + " " +
           format_mass(cur.mass[e]) + "\n";
  }
  return out;
}

/// Decomposition file:
///   paths P
///   <weight> <k> <node_1> ... <node_k>
///   residual R
///   <tail> <head> <mass>        (edges with nonzero cycle mass)
template <typename Mass>
std::string write_decomposition(const Decomposition<Mass>& dec) {
  std::string out = "paths " + std::to_string(dec.curves.paths.size()) + "\n";
  for (const auto& p : dec.curves.paths) {
    out += format_mass(p.weight) + " " + std::to_string(p.nodes.size());
    for (std::size_t n : p.nodes) out += " " + std::to_string(n);
    out += "\n";
  }
  std::string rows;
  std::size_t count = 0;
  for (std::size_t e = 0; e < dec.cycle_part.mass.size(); ++e) {
    if (dec.cycle_part.mass[e] == 0) continue;
    ++count;
    rows += std::to_string(dec.cycle_part.graph.edge(e).tail) + " " + std::to_string(dec.cycle_part.graph.edge(e).head) +
            " " + format_mass(dec.cycle_part.mass[e]) + "\n";
  }
  return out + "residual " + std::to_string(count) + "\n" + rows;
}

}  // namespace osgflow
