#pragma once

// Dense tableau simplex (Bland's rule) for  max c.x  s.t.  A x <= b, x >= 0,
// with b >= 0 so the origin is feasible. Small problems only.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "osgflow/measure.hpp"

namespace oracle {

inline double simplex_max(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                          const std::vector<double>& c) {
  const std::size_t m = A.size(), n = c.size();
  // Tableau rows 0..m-1: [A | I | b]; row m: [-c | 0 | 0].
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(n + m + 1, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (b[i] < 0.0) throw std::invalid_argument("simplex oracle needs b >= 0");
    for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
    T[i][n + i] = 1.0;
    T[i][n + m] = b[i];
    basis[i] = n + i;
  }
  for (std::size_t j = 0; j < n; ++j) T[m][j] = -c[j];
  const double eps = 1e-12;
  for (int iter = 0; iter < 100000; ++iter) {
    std::size_t enter = n + m;
    for (std::size_t j = 0; j < n + m; ++j) {
      if (T[m][j] < -eps) {
        enter = j;
        break;
      }
    }
    if (enter == n + m) return T[m][n + m];
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (T[i][enter] > eps) {
        const double ratio = T[i][n + m] / T[i][enter];
        if (ratio < best - eps || (std::abs(ratio - best) <= eps && leave < m && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave == m) throw std::runtime_error("simplex oracle: unbounded");
    const double piv = T[leave][enter];
    for (double& v : T[leave]) v /= piv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave || T[i][enter] == 0.0) continue;
      const double f = T[i][enter];
      for (std::size_t j = 0; j <= n + m; ++j) T[i][j] -= f * T[leave][j];
    }
    basis[leave] = enter;
  }
  throw std::runtime_error("simplex oracle: iteration limit");
}

/// Flat distance from its primal definition: with psi_i = phi_i + s in [0, 2s],
/// maximize sum c_i psi_i - s sum c_i subject to psi_i - psi_j <= |x_i - x_j|.
inline double flat_distance_lp(const osgflow::SignedParticleMeasure& mu, const osgflow::SignedParticleMeasure& nu,
                               double s) {
  std::vector<osgflow::Point> x;
  std::vector<double> c;
  for (const auto& a : mu.atoms()) {
    x.push_back(a.position);
    c.push_back(a.weight);
  }
  for (const auto& a : nu.atoms()) {
    x.push_back(a.position);
    c.push_back(-a.weight);
  }
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n, 0.0);
    row[i] = 1.0;
    A.push_back(row);
    b.push_back(2.0 * s);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      std::vector<double> r(n, 0.0);
      r[i] = 1.0;
      r[j] = -1.0;
      A.push_back(r);
      b.push_back(osgflow::distance(x[i], x[j]));
    }
  }
  double total = 0.0;
  for (double v : c) total += v;
  return simplex_max(A, b, c) - s * total;
}

}  // namespace oracle
