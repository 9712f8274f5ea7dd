#pragma once

// Finite signed atomic measures sum_i w_i delta_{x_i} on R^d.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "osgflow/field.hpp"

namespace osgflow {

struct Atom {
  Point position;
  double weight = 0.0;
};

/// Positions closer than this in every coordinate are treated as one atom.
inline constexpr double kMergeTolerance = 1e-12;

class SignedParticleMeasure {
 public:
  explicit SignedParticleMeasure(std::size_t dim = 1) : dim_(dim) {}

  /// Merges coincident atoms (weights summed) and prunes zero weights.
  /// Surviving atoms keep the order of their first occurrence.
  SignedParticleMeasure(std::size_t dim, std::vector<Atom> atoms) : dim_(dim) {
    for (const Atom& a : atoms) {
      if (a.position.size() != dim_) throw std::invalid_argument("atom has the wrong dimension");
      if (!std::isfinite(a.weight)) throw std::invalid_argument("atom weight is not finite");
      for (double c : a.position) {
        if (!std::isfinite(c)) throw std::invalid_argument("atom position is not finite");
      }
    }
    const std::size_t n = atoms.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return atoms[a].position.empty() ? a < b : atoms[a].position[0] < atoms[b].position[0];
    });
    // representative[i] = index of the atom that absorbs atom i.
    std::vector<std::size_t> representative(n);
    std::iota(representative.begin(), representative.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t i = order[p];
      if (representative[i] != i) continue;
      for (std::size_t q = p + 1; q < n; ++q) {
        const std::size_t j = order[q];
        if (dim_ > 0 && atoms[j].position[0] - atoms[i].position[0] > kMergeTolerance) break;
        if (representative[j] != j) continue;
        if (close(atoms[i].position, atoms[j].position)) representative[j] = i;
      }
    }
    // Absorb into the earliest original index of each cluster.
    std::vector<std::size_t> head(n);
    std::iota(head.begin(), head.end(), 0);
    for (std::size_t i = 0; i < n; ++i) head[representative[i]] = std::min(head[representative[i]], i);
    std::vector<double> weight(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t h = head[representative[i]];
      weight[h] += atoms[i].weight;
      if (h != i) ++merged_;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (head[representative[i]] != i) continue;
      if (weight[i] == 0.0) {
        ++pruned_;
        continue;
      }
      atoms_.push_back({std::move(atoms[i].position), weight[i]});
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }

  /// Number of input atoms absorbed into another one on construction.
  std::size_t merged_count() const noexcept { return merged_; }
  std::size_t pruned_count() const noexcept { return pruned_; }

  double total_variation() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += std::abs(a.weight);
    return s;
  }

  double total_mass() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.weight;
    return s;
  }

  SignedParticleMeasure scaled(double factor) const {
    std::vector<Atom> out = atoms_;
    for (Atom& a : out) a.weight *= factor;
    return SignedParticleMeasure(dim_, std::move(out));
  }

  /// |mu| = mu+ + mu-.
  SignedParticleMeasure abs() const {
    std::vector<Atom> out = atoms_;
    for (Atom& a : out) a.weight = std::abs(a.weight);
    return SignedParticleMeasure(dim_, std::move(out));
  }

  friend SignedParticleMeasure operator+(const SignedParticleMeasure& a, const SignedParticleMeasure& b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("adding measures of different dimension");
    std::vector<Atom> out = a.atoms_;
    out.insert(out.end(), b.atoms_.begin(), b.atoms_.end());
    return SignedParticleMeasure(a.dim_, std::move(out));
  }

  friend SignedParticleMeasure operator-(const SignedParticleMeasure& a, const SignedParticleMeasure& b) {
    return a + b.scaled(-1.0);
  }

 private:
  static bool close(const Point& a, const Point& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > kMergeTolerance) return false;
    }
    return true;
  }

  std::size_t dim_;
  std::vector<Atom> atoms_;
  std::size_t merged_ = 0;
  std::size_t pruned_ = 0;
};

inline SignedParticleMeasure dirac(Point x, double weight = 1.0) {
  const std::size_t d = x.size();
  return SignedParticleMeasure(d, {{std::move(x), weight}});
}

struct JordanParts {
  SignedParticleMeasure positive;
  SignedParticleMeasure negative;
};

/// mu = mu+ - mu- with mu+ and mu- carried by disjoint atoms.
inline JordanParts jordan_decompose(const SignedParticleMeasure& mu) {
  std::vector<Atom> pos, neg;
  for (const Atom& a : mu.atoms()) {
    if (a.weight > 0.0) {
      pos.push_back(a);
    } else {
      neg.push_back({a.position, -a.weight});
    }
  }
  return {SignedParticleMeasure(mu.dim(), std::move(pos)), SignedParticleMeasure(mu.dim(), std::move(neg))};
}

class PushforwardError : public std::runtime_error {
 public:
  PushforwardError(std::size_t atom, const std::string& why)
      : std::runtime_error("push-forward failed at atom " + std::to_string(atom) + ": " + why), atom_(atom) {}
  std::size_t atom() const noexcept { return atom_; }

 private:
  std::size_t atom_;
};

/// f#mu: positions mapped, weights kept, coincident images merged.
inline SignedParticleMeasure pushforward(const SignedParticleMeasure& mu, const std::function<Point(const Point&)>& map) {
  std::vector<Atom> out;
  out.reserve(mu.size());
  std::size_t out_dim = mu.dim();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Point y;
    try {
      y = map(mu[i].position);
    } catch (const std::exception& e) {
      throw PushforwardError(i, e.what());
    }
    if (i == 0) out_dim = y.size();
    if (y.size() != out_dim) throw PushforwardError(i, "image has inconsistent dimension");
    out.push_back({std::move(y), mu[i].weight});
  }
  return SignedParticleMeasure(out_dim, std::move(out));
}

/// Radial bump (1 - |x - c|^2 / r^2)^3 clipped at 0; C^2 with compact support.
struct TestFunction {
  Point center;
  double radius = 1.0;

  TestFunction(Point c, double r) : center(std::move(c)), radius(r) {
    if (!(radius > 0.0)) throw std::invalid_argument("test function radius must be positive");
  }

  double operator()(std::span<const double> x) const {
    const double q = scaled_square(x);
    if (q >= 1.0) return 0.0;
    const double u = 1.0 - q;
    return u * u * u;
  }

  Point gradient(std::span<const double> x) const {
    Point g(center.size(), 0.0);
    const double q = scaled_square(x);
    if (q >= 1.0) return g;
    const double u = 1.0 - q;
    const double f = -6.0 * u * u / (radius * radius);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = f * (x[i] - center[i]);
    return g;
  }

 private:
  double scaled_square(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) s += (x[i] - center[i]) * (x[i] - center[i]);
    return s / (radius * radius);
  }
};

/// sum_i w_i phi(x_i).
inline double pair(const SignedParticleMeasure& mu, const TestFunction& phi) {
  double s = 0.0;
  for (const Atom& a : mu.atoms()) s += a.weight * phi(a.position);
  return s;
}

/// sum_i w_i <V(t, x_i), grad phi(x_i)>.
inline double pair_gradient(const SignedParticleMeasure& mu, const TestFunction& phi, const VelocityField& field,
                            double t) {
  double s = 0.0;
  Point v(field.dim());
  for (const Atom& a : mu.atoms()) {
    const Point g = phi.gradient(a.position);
    field.eval(t, a.position, v);
    double inner = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) inner += v[i] * g[i];
    s += a.weight * inner;
  }
  return s;
}

}  // namespace osgflow
