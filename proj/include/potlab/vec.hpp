#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace potlab {

/// Point or vector in R^N with N <= 3. Unused trailing components stay zero.
using Vec = std::array<double, 3>;

/// Integer lattice coordinates (node position divided by h).
using IVec = std::array<long, 3>;

inline constexpr int kMaxDim = 3;

inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator-(const Vec& a) { return {-a[0], -a[1], -a[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline Vec normalized(const Vec& a) {
  const double n = norm(a);
  return n > 0.0 ? (1.0 / n) * a : a;
}

/// Volume of the unit ball in R^n, pi^{n/2} / Gamma(n/2 + 1).
inline double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Surface measure of the unit sphere in R^n, n * V_n.
inline double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

}  // namespace potlab
