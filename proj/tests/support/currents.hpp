#pragma once

// Builders for small hand-made currents.

#include <utility>
#include <vector>

#include "osgflow/current.hpp"
#include "support/decomposition_oracle.hpp"

namespace testing_support {

/// 1D nodes at (t_i, x_i); edges (tail, head) with the given masses.
template <typename Mass>
osgflow::DiscreteCurrent<Mass> make_current(const std::vector<std::pair<double, double>>& nodes,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                            const std::vector<Mass>& mass) {
  osgflow::DiscreteCurrent<Mass> c{osgflow::SpaceTimeGraph(1), {}, 0.0};
  for (std::size_t i = 0; i < nodes.size(); ++i) c.graph.add_node(i, nodes[i].first, {nodes[i].second});
  for (const auto& [a, b] : edges) c.graph.add_edge(a, b);
  c.mass = mass;
  return c;
}

/// Node i sits at (t, x) = (i, i^2 / 7) so every edge has positive length.
template <typename Mass>
osgflow::DiscreteCurrent<Mass> from_small(const oracle::SmallGraph& g) {
  std::vector<std::pair<double, double>> nodes;
  for (std::size_t i = 0; i < g.nodes; ++i) nodes.emplace_back(static_cast<double>(i), static_cast<double>(i * i) / 7.0);
  std::vector<Mass> mass;
  for (int m : g.mass) mass.push_back(Mass(m));
  return make_current<Mass>(nodes, g.edges, mass);
}

}  // namespace testing_support
