#pragma once

// Seeded generator with platform-independent output, so sampled reports and
// CLI artifacts are bit-reproducible across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace osgflow {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Standard normal by Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::vector<double> on_sphere(std::size_t dim) {
    std::vector<double> u(dim);
    double n2 = 0.0;
    while (n2 == 0.0) {
      n2 = 0.0;
      for (double& c : u) {
        c = normal();
        n2 += c * c;
      }
    }
    const double n = std::sqrt(n2);
    for (double& c : u) c /= n;
    return u;
  }

  std::vector<double> in_ball(std::size_t dim, double radius) {
    std::vector<double> u = on_sphere(dim);
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(dim));
    for (double& c : u) c *= r;
    return u;
  }

 private:
  std::uint64_t state_;
};

}  // namespace osgflow
