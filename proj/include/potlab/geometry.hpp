#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "potlab/grid.hpp"

namespace potlab {

/// Lattice nodes of the complement of Omega inside the closed ball I(y, rho).
struct ComplementCap {
  int dim = 2;
  double h = 0.0;
  Vec center{};
  IVec center_lattice{};
  double radius = 0.0;
  Shape domain_shape = Shape(Point{});
  /// Sorted lattice coordinates of the cap nodes.
  std::vector<IVec> nodes;

  [[nodiscard]] std::size_t count() const { return nodes.size(); }
  [[nodiscard]] double volume() const;
  [[nodiscard]] bool contains(const IVec& l) const;
};

/// Radius R of the smallest ball about the bounding-box centre containing the shape.
double enclosing_radius(const GridDomain& domain);
Vec enclosing_center(const GridDomain& domain);

/// `y` must be a boundary node and 0 < rho < R / 2.
ComplementCap complement_cap(const GridDomain& domain, std::size_t y, double rho);

/// sigma(rho) = |E_rho| / (V_N rho^N), clamped to [0, 1].
double density(const ComplementCap& cap);

struct SolidAngleOptions {
  int directions = 4096;
  int probes = 512;
  std::uint64_t seed = 20240601;
};

inline constexpr int kMinDirections = 16;
inline constexpr int kMinProbes = 4;

struct SolidAngleEstimate {
  double value = 0.0;           ///< min over probes of the hit-direction measure
  double standard_error = 0.0;  ///< binomial standard error at the minimising probe
  Vec worst_probe{};
  int directions = 0;
  int probes = 0;
  std::uint64_t seed = 0;
};

/// Monte-Carlo estimate of inf_x |{xi : the line x + s xi meets E}| over probes x
/// in I(y, rho) \ E. Lines are traced against the analytic shape.
SolidAngleEstimate solid_angle_lower_bound(const ComplementCap& cap, const SolidAngleOptions& options = {});

/// True when the line through x with direction xi meets E = complement(Omega) n closed I(y, rho).
bool line_meets_cap(const ComplementCap& cap, const Vec& x, const Vec& xi);

/// max(sigma N V_N / 2^N, angle).
double sigma_hat_lower_bound(const ComplementCap& cap, double angle);
double sigma_hat_lower_bound(int dim, double sigma, double angle);

struct DensitySample {
  /// log(1 / rho); radii this small are not representable as doubles directly.
  double log_inv_rho = 0.0;
  double sigma = 0.0;
};

struct DensityCheck {
  double log_inv_rho = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool skipped = false;
};

struct DensityCriterionReport {
  std::vector<DensityCheck> checks;
  std::vector<std::string> warnings;
  bool verdict = false;
};

/// Tests sigma^{t/(t-1)} >= Lambda / log log (1/rho) at each radius. Radii with
/// rho >= 1/e are skipped; the verdict covers radii below rho_star.
DensityCriterionReport criterion_density(const std::vector<DensitySample>& samples, double t, double lambda,
                                         double log_inv_rho_star);

}  // namespace potlab
