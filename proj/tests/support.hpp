#pragma once
// Shared helpers for the test binaries.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "potlab/solver.hpp"

namespace potlab::testing {

/// Low-frequency trigonometric sum c0 + sum a_j sin(k_j . x + phase_j); smooth on any
/// bounded domain and different for every seed.
inline BoundaryData smooth_random_data(std::uint64_t seed, double amplitude = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  struct Mode {
    Vec k;
    double a;
    double phase;
  };
  std::vector<Mode> modes;
  for (int j = 0; j < 4; ++j) modes.push_back({{3.0 * U(rng), 3.0 * U(rng), 3.0 * U(rng)}, amplitude * U(rng), 3.0 * U(rng)});
  const double c0 = amplitude * U(rng);
  return {[modes, c0](const Vec& x) {
            double v = c0;
            for (const auto& m : modes) v += m.a * std::sin(dot(m.k, x) + m.phase);
            return v;
          },
          "smooth-random"};
}

/// phi + a smooth nonnegative increment, so the pair is ordered on the boundary.
inline BoundaryData raised(const BoundaryData& phi, std::uint64_t seed) {
  const BoundaryData bump = smooth_random_data(seed, 0.5);
  return {[phi, bump](const Vec& x) { return phi(x) + bump(x) * bump(x) + 0.05; }, "smooth-random-raised"};
}

}  // namespace potlab::testing
