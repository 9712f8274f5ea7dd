#pragma once

// Bounded-Lipschitz (flat) distance between atomic signed measures:
//
//   sup { sum_i c_i phi(x_i) : |phi(x_i) - phi(x_j)| <= |x_i - x_j|, |phi(x_i)| <= s }
//
// with c = mu - nu. The LP is solved through its dual, an uncapacitated
// transportation problem: positive atoms ship to negative atoms at cost
// min(|x_i - x_j|, 2s), and any atom can trade with a ground node at cost s.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "osgflow/measure.hpp"

namespace osgflow {

inline constexpr std::size_t kDefaultFlatAtomLimit = 2000;

class FlatDistanceSizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

namespace detail {

// Successive shortest paths with Dijkstra on reduced costs. cost(i, j) is
// a dense P x Q matrix; supply and demand are balanced.
inline double min_cost_transport(std::vector<double> supply, std::vector<double> demand,
                                 const std::vector<double>& cost) {
  const std::size_t P = supply.size();
  const std::size_t Q = demand.size();
  const std::size_t V = P + Q;
  double total = 0.0;
  for (double s : supply) total += s;
  const double eps = 1e-15 * std::max(total, 1e-300);
  std::vector<double> flow(P * Q, 0.0);
  std::vector<double> pot(V, 0.0), dist(V);
  std::vector<std::size_t> parent(V);
  std::vector<char> done(V);
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();

  while (std::any_of(supply.begin(), supply.end(), [eps](double s) { return s > eps; })) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), none);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < P; ++i) {
      if (supply[i] > eps) dist[i] = 0.0;
    }
    std::size_t target = none;
    while (true) {
      std::size_t u = none;
      double best = inf;
      for (std::size_t v = 0; v < V; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u == none) break;
      done[u] = 1;
      if (u >= P && demand[u - P] > eps) {
        target = u;
        break;
      }
      if (u < P) {
        for (std::size_t j = 0; j < Q; ++j) {
          const std::size_t v = P + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, cost[u * Q + j] + pot[u] - pot[v]);
          if (dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            parent[v] = u;
          }
        }
      } else {
        const std::size_t j = u - P;
        for (std::size_t i = 0; i < P; ++i) {
          if (done[i] || flow[i * Q + j] <= eps) continue;
          const double rc = std::max(0.0, -cost[i * Q + j] + pot[u] - pot[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = u;
          }
        }
      }
    }
    // Only rounding dust can be left once no consumer with demand is reachable.
    if (target == none) break;
    const double cap = dist[target];
    for (std::size_t v = 0; v < V; ++v) pot[v] += std::min(dist[v], cap);

    // Walk back: consumer <- supplier (forward arc) <- consumer (reverse arc) ...
    double amount = demand[target - P];
    std::size_t v = target;
    while (parent[v] != none) {
      const std::size_t u = parent[v];
      if (u >= P) amount = std::min(amount, flow[v * Q + (u - P)]);
      v = u;
    }
    amount = std::min(amount, supply[v]);
    const std::size_t source = v;
    v = target;
    while (parent[v] != none) {
      const std::size_t u = parent[v];
      if (u < P) {
        flow[u * Q + (v - P)] += amount;
      } else {
        flow[v * Q + (u - P)] -= amount;
      }
      v = u;
    }
    supply[source] -= amount;
    demand[target - P] -= amount;
    if (supply[source] <= eps) supply[source] = 0.0;
  }
  double value = 0.0;
  for (std::size_t k = 0; k < P * Q; ++k) {
    if (flow[k] > 0.0) value += flow[k] * cost[k];
  }
  return value;
}

}  // namespace detail

inline double flat_distance(const SignedParticleMeasure& mu, const SignedParticleMeasure& nu, double scale,
                            std::size_t max_atoms = kDefaultFlatAtomLimit) {
  if (!(scale > 0.0)) throw std::invalid_argument("flat_distance scale must be positive");
  if (mu.dim() != nu.dim()) throw std::invalid_argument("flat_distance of measures in different dimensions");
  if (mu.size() > max_atoms || nu.size() > max_atoms) {
    throw FlatDistanceSizeError("flat_distance input exceeds the atom limit");
  }
  const SignedParticleMeasure diff = mu - nu;
  std::vector<const Atom*> sources, sinks;
  double net = 0.0;
  for (const Atom& a : diff.atoms()) {
    (a.weight > 0.0 ? sources : sinks).push_back(&a);
    net += a.weight;
  }
  std::vector<double> supply, demand;
  for (const Atom* a : sources) supply.push_back(a->weight);
  for (const Atom* a : sinks) demand.push_back(-a->weight);
  const bool ground_sink = net > 0.0;
  const bool ground_source = net < 0.0;
  if (ground_sink) demand.push_back(net);
  if (ground_source) supply.push_back(-net);
  if (supply.empty() || demand.empty()) return 0.0;

  const std::size_t P = supply.size();
  const std::size_t Q = demand.size();
  std::vector<double> cost(P * Q);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < Q; ++j) {
      const bool gi = ground_source && i == P - 1;
      const bool gj = ground_sink && j == Q - 1;
      if (gi && gj) {
        cost[i * Q + j] = 0.0;
      } else if (gi || gj) {
        cost[i * Q + j] = scale;
      } else {
        cost[i * Q + j] = std::min(distance(sources[i]->position, sinks[j]->position), 2.0 * scale);
      }
    }
  }
  return detail::min_cost_transport(std::move(supply), std::move(demand), cost);
}

}  // namespace osgflow
