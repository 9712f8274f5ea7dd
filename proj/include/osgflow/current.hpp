#pragma once

// Discrete space-time 1-currents and their decomposition into simple
// oriented paths plus a divergence-free remainder.
//
// A current lives on a directed graph in R^{1+d}. Every edge carries a
// multiplicity m_e >= 0 ("mass"); the associated vector measure is
// m_e * (segment with unit orientation W_e), so its total variation is
// eta_e = m_e * length_e and its divergence at node n is
// theta_n = sum_{e into n} m_e - sum_{e out of n} m_e.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "osgflow/field.hpp"
#include "osgflow/flat_distance.hpp"
#include "osgflow/flow.hpp"
#include "osgflow/measure.hpp"
#include "osgflow/pde.hpp"

namespace osgflow {

using ExactMass = boost::multiprecision::cpp_rational;

template <typename Mass>
struct MassTraits;

template <>
struct MassTraits<double> {
  static constexpr bool exact = false;
  static double from_double(double x) { return x; }
  static double to_double(double x) { return x; }
  static double abs(double x) { return std::abs(x); }
};

template <>
struct MassTraits<ExactMass> {
  static constexpr bool exact = true;
  /// Every finite double is a dyadic rational; the conversion is exact.
  static ExactMass from_double(double x) { return ExactMass(x); }
  static double to_double(const ExactMass& x) { return x.convert_to<double>(); }
  static ExactMass abs(const ExactMass& x) { return boost::multiprecision::abs(x); }
};

/// Parses "12", "-0.125", "1.5e-3" or "3/8" exactly.
inline ExactMass parse_exact(const std::string& text) {
  const auto slash = text.find('/');
  auto parse_decimal = [&text](const std::string& s) -> ExactMass {
    std::size_t pos = 0;
    bool negative = false;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) negative = s[pos++] == '-';
    boost::multiprecision::cpp_int digits = 0;
    std::int64_t exponent = 0;
    bool any = false, dot = false;
    for (; pos < s.size(); ++pos) {
      const char c = s[pos];
      if (c >= '0' && c <= '9') {
        digits = digits * 10 + (c - '0');
        if (dot) --exponent;
        any = true;
      } else if (c == '.' && !dot) {
        dot = true;
      } else {
        break;
      }
    }
    if (!any) throw std::invalid_argument("not a number: '" + text + "'");
    if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
      std::size_t used = 0;
      const std::string tail = s.substr(pos + 1);
      long long e = 0;
      try {
        e = std::stoll(tail, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != tail.size()) throw std::invalid_argument("bad exponent in '" + text + "'");
      exponent += e;
      pos = s.size();
    }
    if (pos != s.size()) throw std::invalid_argument("trailing characters in '" + text + "'");
    if (exponent > 4000 || exponent < -4000) throw std::invalid_argument("exponent out of range in '" + text + "'");
    ExactMass value(digits);
    const boost::multiprecision::cpp_int scale = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                            static_cast<unsigned>(std::abs(exponent)));
    value = exponent >= 0 ? value * ExactMass(scale) : value / ExactMass(scale);
    return negative ? ExactMass(-value) : value;
  };
  if (slash == std::string::npos) return parse_decimal(text);
  const ExactMass num = parse_decimal(text.substr(0, slash));
  const ExactMass den = parse_decimal(text.substr(slash + 1));
  if (den == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
  return num / den;
}

struct SpaceTimeNode {
  std::size_t slice = 0;
  double time = 0.0;
  Point position;
};

struct SpaceTimeEdge {
  std::size_t tail = 0;
  std::size_t head = 0;
  Point orientation;  // unit vector in R^{1+d}, time component first
  double length = 0.0;
};

class SpaceTimeGraph {
 public:
  explicit SpaceTimeGraph(std::size_t dim = 1) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<SpaceTimeNode>& nodes() const noexcept { return nodes_; }
  const std::vector<SpaceTimeEdge>& edges() const noexcept { return edges_; }
  const SpaceTimeNode& node(std::size_t n) const { return nodes_.at(n); }
  const SpaceTimeEdge& edge(std::size_t e) const { return edges_.at(e); }
  const std::vector<std::size_t>& out_edges(std::size_t n) const { return out_.at(n); }
  const std::vector<std::size_t>& in_edges(std::size_t n) const { return in_.at(n); }

  std::size_t add_node(std::size_t slice, double time, Point position) {
    if (position.size() != dim_) throw std::invalid_argument("node has the wrong spatial dimension");
    nodes_.push_back({slice, time, std::move(position)});
    out_.emplace_back();
    in_.emplace_back();
    return nodes_.size() - 1;
  }

  std::size_t add_edge(std::size_t tail, std::size_t head) {
    if (tail >= nodes_.size() || head >= nodes_.size()) throw std::out_of_range("edge endpoint is not a node");
    SpaceTimeEdge e{tail, head, Point(dim_ + 1), 0.0};
    e.orientation[0] = nodes_[head].time - nodes_[tail].time;
    for (std::size_t i = 0; i < dim_; ++i) e.orientation[i + 1] = nodes_[head].position[i] - nodes_[tail].position[i];
    e.length = norm(e.orientation);
    if (!(e.length > 0.0)) throw std::invalid_argument("edge endpoints coincide in space-time");
    for (double& c : e.orientation) c /= e.length;
    edges_.push_back(std::move(e));
    out_[tail].push_back(edges_.size() - 1);
    in_[head].push_back(edges_.size() - 1);
    return edges_.size() - 1;
  }

  /// Edge tail -> head, if present.
  std::size_t find_edge(std::size_t tail, std::size_t head) const {
    for (std::size_t e : out_.at(tail)) {
      if (edges_[e].head == head) return e;
    }
    return npos;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  std::size_t dim_;
  std::vector<SpaceTimeNode> nodes_;
  std::vector<SpaceTimeEdge> edges_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
};

template <typename Mass>
struct DiscreteCurrent {
  SpaceTimeGraph graph;
  std::vector<Mass> mass;  // multiplicity per edge
  /// max_e |W_e - sigma (1, V) / |(1, V)|| at edge midpoints; 0 when not measured.
  double orientation_defect = 0.0;

  void validate() const {
    if (mass.size() != graph.edges().size()) throw std::invalid_argument("current needs one mass per edge");
    for (const Mass& m : mass) {
      if (m < 0) throw std::invalid_argument("current masses must be nonnegative");
    }
  }

  /// eta_e = m_e * length_e.
  double geometric_mass(std::size_t e) const { return MassTraits<Mass>::to_double(mass[e]) * graph.edge(e).length; }

  double total_geometric_mass() const {
    double s = 0.0;
    for (std::size_t e = 0; e < mass.size(); ++e) s += geometric_mass(e);
    return s;
  }
};

/// theta_n = inflow - outflow.
template <typename Mass>
std::vector<Mass> divergence(const DiscreteCurrent<Mass>& current) {
  current.validate();
  std::vector<Mass> theta(current.graph.nodes().size(), Mass(0));
  for (std::size_t e = 0; e < current.mass.size(); ++e) {
    theta[current.graph.edge(e).head] += current.mass[e];
    theta[current.graph.edge(e).tail] -= current.mass[e];
  }
  return theta;
}

class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One node per atom per snapshot; one edge per atom per time interval,
/// pointing forward in time for positive atoms and backward for negative
/// ones (the sign field sigma), with multiplicity |w|.
template <typename Mass>
DiscreteCurrent<Mass> discretize_trajectory(const MeasureTrajectory& traj, const VelocityField& field) {
  traj.validate();
  if (!traj.merge_free) throw DecompositionError("trajectory merged atoms; atoms cannot be tracked across snapshots");
  DiscreteCurrent<Mass> cur{SpaceTimeGraph(field.dim()), {}, 0.0};
  if (traj.snapshots.empty()) return cur;
  const std::size_t n = traj.snapshots.front().size();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto& snap = traj.snapshots[k];
    if (snap.size() != n) {
      throw DecompositionError("snapshot " + std::to_string(k) + " has a different atom count");
    }
    if (snap.dim() != field.dim()) throw DecompositionError("snapshot dimension does not match the field");
    for (std::size_t i = 0; i < n; ++i) {
      if (snap[i].weight != traj.snapshots.front()[i].weight) {
        throw DecompositionError("atom " + std::to_string(i) + " changes weight in snapshot " + std::to_string(k));
      }
      cur.graph.add_node(k, traj.times[k], snap[i].position);
    }
  }
  Point mid(field.dim()), v(field.dim()), w(field.dim() + 1);
  for (std::size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double weight = traj.snapshots.front()[i].weight;
      const std::size_t a = k * n + i, b = (k + 1) * n + i;
      const std::size_t e = weight > 0.0 ? cur.graph.add_edge(a, b) : cur.graph.add_edge(b, a);
      cur.mass.push_back(MassTraits<Mass>::from_double(std::abs(weight)));
      // Compare with sigma (1, V) / |(1, V)| at the midpoint.
      const double sigma = weight > 0.0 ? 1.0 : -1.0;
      for (std::size_t c = 0; c < field.dim(); ++c) {
        mid[c] = 0.5 * (cur.graph.node(a).position[c] + cur.graph.node(b).position[c]);
      }
      field.eval(0.5 * (traj.times[k] + traj.times[k + 1]), mid, v);
      w[0] = 1.0;
      std::copy(v.begin(), v.end(), w.begin() + 1);
      const double len = norm(w);
      double defect = 0.0;
      for (std::size_t c = 0; c <= field.dim(); ++c) {
        const double diff = cur.graph.edge(e).orientation[c] - sigma * w[c] / len;
        defect += diff * diff;
      }
      cur.orientation_defect = std::max(cur.orientation_defect, std::sqrt(defect));
    }
  }
  return cur;
}

enum class Monotonicity { increasing, decreasing, mixed };

inline const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::increasing: return "increasing";
    case Monotonicity::decreasing: return "decreasing";
    case Monotonicity::mixed: return "mixed";
  }
  return "mixed";
}

template <typename Mass>
struct CurvePath {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> edges;  // edges[k] joins nodes[k] and nodes[k+1]
  Mass weight = Mass(0);
  Monotonicity monotonicity = Monotonicity::mixed;
};

template <typename Mass>
struct CurveMeasure {
  std::vector<CurvePath<Mass>> paths;

  /// Sum of the weights of the paths crossing each edge, in either direction.
  std::vector<Mass> edge_totals(std::size_t n_edges) const {
    std::vector<Mass> tot(n_edges, Mass(0));
    for (const auto& p : paths) {
      for (std::size_t e : p.edges) tot.at(e) += p.weight;
    }
    return tot;
  }
};

inline Monotonicity classify_path(const SpaceTimeGraph& graph, const std::vector<std::size_t>& nodes) {
  bool inc = true, dec = true;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const double dt = graph.node(nodes[k]).time - graph.node(nodes[k - 1]).time;
    if (!(dt > 0.0)) inc = false;
    if (!(dt < 0.0)) dec = false;
  }
  if (nodes.size() < 2) return Monotonicity::mixed;
  return inc ? Monotonicity::increasing : (dec ? Monotonicity::decreasing : Monotonicity::mixed);
}

/// Path through the given nodes; each step uses the edge nodes[k] -> nodes[k+1]
/// when it exists and otherwise the reversed edge.
template <typename Mass>
CurvePath<Mass> make_path(const DiscreteCurrent<Mass>& current, std::vector<std::size_t> nodes, Mass weight) {
  CurvePath<Mass> p;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    std::size_t e = current.graph.find_edge(nodes[k], nodes[k + 1]);
    if (e == SpaceTimeGraph::npos) e = current.graph.find_edge(nodes[k + 1], nodes[k]);
    if (e == SpaceTimeGraph::npos) throw std::invalid_argument("path step is not an edge of the graph");
    p.edges.push_back(e);
  }
  p.monotonicity = classify_path(current.graph, nodes);
  p.nodes = std::move(nodes);
  p.weight = std::move(weight);
  return p;
}

template <typename Mass>
struct Decomposition {
  DiscreteCurrent<Mass> cycle_part;  // divergence-free remainder
  CurveMeasure<Mass> curves;
  std::vector<std::string> warnings;
};

/// Greedy path peeling. Starting from the source (theta < 0) that comes
/// first in (time, position) order, follow positive-residual outgoing edges,
/// always taking the edge whose head comes first in that order, until a node
/// with theta > 0 is reached. A revisited node closes a cycle, whose minimum
/// residual is moved to the divergence-free part. The path weight is the
/// minimum of the two boundary excesses and the residuals along the way.
/// When no source is left the remaining mass is divergence-free.
template <typename Mass>
Decomposition<Mass> smirnov_decompose(const DiscreteCurrent<Mass>& current, double float_tolerance = 1e-12) {
  using Traits = MassTraits<Mass>;
  current.validate();
  const SpaceTimeGraph& g = current.graph;
  const std::size_t N = g.nodes().size();
  const std::size_t E = g.edges().size();

  Mass zero_level(0);
  if constexpr (!Traits::exact) {
    double biggest = 0.0;
    for (const Mass& m : current.mass) biggest = std::max(biggest, Traits::to_double(m));
    zero_level = Mass(float_tolerance * biggest);
  }

  // Deterministic order on nodes.
  std::vector<std::size_t> order(N), rank(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&g](std::size_t a, std::size_t b) {
    const auto& na = g.node(a);
    const auto& nb = g.node(b);
    if (na.time != nb.time) return na.time < nb.time;
    if (na.position != nb.position) return na.position < nb.position;
    return a < b;
  });
  for (std::size_t r = 0; r < N; ++r) rank[order[r]] = r;
  std::vector<std::vector<std::size_t>> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    out[n] = g.out_edges(n);
    std::sort(out[n].begin(), out[n].end(), [&](std::size_t a, std::size_t b) {
      const std::size_t ra = rank[g.edge(a).head], rb = rank[g.edge(b).head];
      return ra != rb ? ra < rb : a < b;
    });
  }

  std::vector<Mass> residual = current.mass;
  std::vector<Mass> theta = divergence(current);
  std::vector<std::size_t> next_out(N, 0);
  std::vector<std::ptrdiff_t> on_walk(N, -1);
  Decomposition<Mass> out_dec{{g, std::vector<Mass>(E, Mass(0)), current.orientation_defect}, {}, {}};

  std::vector<std::size_t> walk_nodes, walk_edges;
  for (std::size_t r = 0; r < N; ++r) {
    const std::size_t src = order[r];
    while (theta[src] < -zero_level) {
      walk_nodes.assign(1, src);
      walk_edges.clear();
      on_walk[src] = 0;
      std::size_t cur = src;
      bool stuck = false;
      while (!(cur != src && theta[cur] > zero_level)) {
        auto& ptr = next_out[cur];
        while (ptr < out[cur].size() && !(residual[out[cur][ptr]] > zero_level)) ++ptr;
        if (ptr == out[cur].size()) {
          stuck = true;
          break;
        }
        const std::size_t e = out[cur][ptr];
        const std::size_t head = g.edge(e).head;
        if (on_walk[head] >= 0) {
          // Close the cycle head -> ... -> cur -> head and retire its bottleneck.
          const auto start = static_cast<std::size_t>(on_walk[head]);
          Mass bottleneck = residual[e];
          for (std::size_t k = start; k < walk_edges.size(); ++k) bottleneck = std::min(bottleneck, residual[walk_edges[k]]);
          residual[e] -= bottleneck;
          for (std::size_t k = start; k < walk_edges.size(); ++k) residual[walk_edges[k]] -= bottleneck;
          for (std::size_t k = start + 1; k < walk_nodes.size(); ++k) on_walk[walk_nodes[k]] = -1;
          walk_nodes.resize(start + 1);
          walk_edges.resize(start);
          cur = head;
          continue;
        }
        on_walk[head] = static_cast<std::ptrdiff_t>(walk_nodes.size());
        walk_nodes.push_back(head);
        walk_edges.push_back(e);
        cur = head;
      }
      for (std::size_t n : walk_nodes) on_walk[n] = -1;
      if (stuck) {
        // Flow balance rules this out for exact masses; in floating point it
        // means the source excess is rounding dust.
        out_dec.warnings.push_back("source node " + std::to_string(src) + " has no outgoing residual; excess " +
                                   std::to_string(Traits::to_double(theta[src])) + " dropped");
        theta[src] = Mass(0);
        break;
      }
      Mass w = -theta[src];
      w = std::min(w, theta[cur]);
      for (std::size_t e : walk_edges) w = std::min(w, residual[e]);
      for (std::size_t e : walk_edges) residual[e] -= w;
      theta[src] += w;
      theta[cur] -= w;
      CurvePath<Mass> path;
      path.nodes = walk_nodes;
      path.edges = walk_edges;
      path.weight = w;
      path.monotonicity = classify_path(g, path.nodes);
      out_dec.curves.paths.push_back(std::move(path));
    }
  }

  for (std::size_t n = 0; n < N; ++n) {
    if (theta[n] != 0) {
      out_dec.warnings.push_back("node " + std::to_string(n) + " keeps boundary mass " +
                                 std::to_string(Traits::to_double(theta[n])) + " below tolerance");
    }
  }
  const std::vector<Mass> used = out_dec.curves.edge_totals(E);
  for (std::size_t e = 0; e < E; ++e) out_dec.cycle_part.mass[e] = current.mass[e] - used[e];
  return out_dec;
}

template <typename Mass>
struct NoCancellationReport {
  Mass edge_defect = Mass(0);              // max_e |cycle_e + sum of path weights on e - m_e|
  Mass boundary_defect = Mass(0);          // max_n |endpoint weight at n - |theta_n||
  std::size_t orientation_violations = 0;  // path steps against the edge orientation
  std::size_t non_simple_paths = 0;
  Mass cycle_divergence = Mass(0);         // max_n |div(cycle part)_n|
  Mass negative_cycle_mass = Mass(0);      // max_e max(0, -cycle_e)

  bool exact_zero() const {
    return edge_defect == 0 && boundary_defect == 0 && orientation_violations == 0 && non_simple_paths == 0 &&
           cycle_divergence == 0 && negative_cycle_mass == 0;
  }

  double worst() const {
    using T = MassTraits<Mass>;
    double w = std::max({T::to_double(edge_defect), T::to_double(boundary_defect), T::to_double(cycle_divergence),
                         T::to_double(negative_cycle_mass)});
    return orientation_violations + non_simple_paths > 0 ? std::max(w, 1.0) : w;
  }
};

/// Checks total-variation additivity per edge, the endpoint marginals against
/// |theta|, orientation conformance and simplicity of every path.
template <typename Mass>
NoCancellationReport<Mass> verify_no_cancellation(const DiscreteCurrent<Mass>& current,
                                                  const DiscreteCurrent<Mass>& cycle_part,
                                                  const CurveMeasure<Mass>& curves) {
  using Traits = MassTraits<Mass>;
  current.validate();
  const SpaceTimeGraph& g = current.graph;
  const std::size_t E = g.edges().size();
  const std::size_t N = g.nodes().size();
  if (cycle_part.mass.size() != E) throw std::invalid_argument("cycle part lives on a different graph");
  NoCancellationReport<Mass> rep;

  const std::vector<Mass> tot = curves.edge_totals(E);
  for (std::size_t e = 0; e < E; ++e) {
    rep.edge_defect = std::max(rep.edge_defect, Traits::abs(cycle_part.mass[e] + tot[e] - current.mass[e]));
    if (cycle_part.mass[e] < 0) rep.negative_cycle_mass = std::max(rep.negative_cycle_mass, Mass(-cycle_part.mass[e]));
  }

  const std::vector<Mass> theta = divergence(current);
  std::vector<Mass> endpoints(N, Mass(0));
  std::vector<char> seen(N, 0);
  for (const auto& p : curves.paths) {
    if (p.nodes.empty()) continue;
    endpoints.at(p.nodes.front()) += p.weight;
    endpoints.at(p.nodes.back()) += p.weight;
    if (p.edges.size() + 1 != p.nodes.size()) throw std::invalid_argument("path has inconsistent node/edge lists");
    for (std::size_t k = 0; k < p.edges.size(); ++k) {
      const SpaceTimeEdge& e = g.edge(p.edges[k]);
      if (e.tail == p.nodes[k] && e.head == p.nodes[k + 1]) continue;
      if (e.tail == p.nodes[k + 1] && e.head == p.nodes[k]) {
        ++rep.orientation_violations;
        continue;
      }
      throw std::invalid_argument("path step does not follow its edge");
    }
    bool simple = true;
    for (std::size_t n : p.nodes) {
      if (seen[n]) simple = false;
      seen[n] = 1;
    }
    for (std::size_t n : p.nodes) seen[n] = 0;
    if (!simple) ++rep.non_simple_paths;
  }
  for (std::size_t n = 0; n < N; ++n) {
    rep.boundary_defect = std::max(rep.boundary_defect, Traits::abs(endpoints[n] - Traits::abs(theta[n])));
  }
  DiscreteCurrent<Mass> cyc = cycle_part;
  cyc.mass = cycle_part.mass;
  for (auto& m : cyc.mass) {
    if (m < 0) m = Mass(0);
  }
  for (const Mass& d : divergence(cyc)) rep.cycle_divergence = std::max(rep.cycle_divergence, Traits::abs(d));
  return rep;
}

template <typename Mass>
struct MonotoneSplit {
  CurveMeasure<Mass> increasing;  // nu+
  CurveMeasure<Mass> decreasing;  // nu-
  CurveMeasure<Mass> mixed;
};

template <typename Mass>
MonotoneSplit<Mass> split_monotone(const CurveMeasure<Mass>& curves, const SpaceTimeGraph& graph) {
  MonotoneSplit<Mass> out;
  for (const auto& p : curves.paths) {
    switch (classify_path(graph, p.nodes)) {
      case Monotonicity::increasing: out.increasing.paths.push_back(p); break;
      case Monotonicity::decreasing: out.decreasing.paths.push_back(p); break;
      case Monotonicity::mixed: out.mixed.paths.push_back(p); break;
    }
  }
  return out;
}

template <typename Mass>
struct BoundaryMeasures {
  SignedParticleMeasure initial;  // at the earliest endpoint of every path
  SignedParticleMeasure final;    // at the latest endpoint of every path
  std::vector<std::pair<std::size_t, Mass>> initial_exact;  // (node, weight) before conversion
  std::vector<std::pair<std::size_t, Mass>> final_exact;
};

/// mu_0 = (B_i)#(nu+ - nu-) and mu_S = (B_f)#(nu+ - nu-), where B_i picks the
/// earliest and B_f the latest endpoint of a path. The sign follows from
/// theta = delta_S x mu_S - delta_0 x mu_0 and div of a path being
/// delta_end - delta_start: a time-increasing path starts at t = 0 and so
/// carries positive mass of mu_0.
template <typename Mass>
BoundaryMeasures<Mass> reconstruct_boundary(const MonotoneSplit<Mass>& split, const SpaceTimeGraph& graph) {
  using Traits = MassTraits<Mass>;
  if (!split.mixed.paths.empty()) throw std::invalid_argument("reconstruct_boundary needs an empty mixed class");
  std::vector<Mass> init(graph.nodes().size(), Mass(0)), fin(graph.nodes().size(), Mass(0));
  std::vector<char> init_used(graph.nodes().size(), 0), fin_used(graph.nodes().size(), 0);
  for (const auto& p : split.increasing.paths) {
    init[p.nodes.front()] += p.weight;
    fin[p.nodes.back()] += p.weight;
    init_used[p.nodes.front()] = fin_used[p.nodes.back()] = 1;
  }
  for (const auto& p : split.decreasing.paths) {
    init[p.nodes.back()] -= p.weight;
    fin[p.nodes.front()] -= p.weight;
    init_used[p.nodes.back()] = fin_used[p.nodes.front()] = 1;
  }
  BoundaryMeasures<Mass> out{SignedParticleMeasure(graph.dim()), SignedParticleMeasure(graph.dim()), {}, {}};
  std::vector<Atom> a0, a1;
  for (std::size_t n = 0; n < graph.nodes().size(); ++n) {
    if (init_used[n] && init[n] != 0) {
      out.initial_exact.emplace_back(n, init[n]);
      a0.push_back({graph.node(n).position, Traits::to_double(init[n])});
    }
    if (fin_used[n] && fin[n] != 0) {
      out.final_exact.emplace_back(n, fin[n]);
      a1.push_back({graph.node(n).position, Traits::to_double(fin[n])});
    }
  }
  out.initial = SignedParticleMeasure(graph.dim(), std::move(a0));
  out.final = SignedParticleMeasure(graph.dim(), std::move(a1));
  return out;
}

/// flat_distance(X(t0, S, .)# mu0_hat, muS_hat).
inline double boundary_transport_defect(const SignedParticleMeasure& initial, const SignedParticleMeasure& final,
                                        const VelocityField& field, const OsgoodCertificate& cert, double t0, double S,
                                        double scale = 1.0, const StepController& ctrl = {}) {
  const SignedParticleMeasure pushed = pushforward(initial, [&](const Point& x) {
    return integrate_flow(field, cert, t0, S, x, ctrl).point;
  });
  return flat_distance(pushed, final, scale, std::max(kDefaultFlatAtomLimit, std::max(pushed.size(), final.size())));
}

}  // namespace osgflow
