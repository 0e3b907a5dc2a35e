#pragma once

#include <optional>
#include <string>
#include <vector>

#include "potlab/geometry.hpp"
#include "potlab/solver.hpp"

namespace potlab {

/// Where the big ball Sigma carrying zero boundary values sits.
/// enclosing:    Sigma = I(y0, 2R), y0 the bounding-box centre of Omega, Omega in I(y0, R).
/// cap_centered: Sigma = I(y, 2 rho), concentric with the cap.
enum class SigmaPlacement : std::uint8_t { enclosing, cap_centered };

std::string placement_name(SigmaPlacement p);
SigmaPlacement placement_from_name(const std::string& name);

struct PotentialCheck {
  double min_u = 0.0;
  double max_u = 0.0;
  bool bounds_ok = false;        ///< 0 <= sign u <= m + tol
  bool equals_m_on_E = false;    ///< u = sign m exactly on E
  bool residual_ok = false;      ///< |residual| <= tol off E, one-sided on E
  [[nodiscard]] bool passed() const { return bounds_ok && equals_m_on_E && residual_ok; }
};

struct CapacitaryPotential {
  Field u;
  SolveReport report;
  std::vector<std::size_t> e_nodes;  ///< indices into u.grid
  PotentialCheck check;
  Vec sigma_center{};
  double sigma_radius = 0.0;
};

/// Ball shape of Sigma for a cap under the given placement.
ShapeSpec sigma_shape(const GridDomain& omega, const ComplementCap& cap, SigmaPlacement placement);

/// Solves the obstacle problem for E = cap on Sigma with level m and the given sign.
CapacitaryPotential capacitary_potential(const GridDomain& omega, const ComplementCap& cap, const OperatorSpec& spec,
                                         int sign, double m, SigmaPlacement placement,
                                         const SolveOptions& options = {});

/// Same as above on a prebuilt Sigma grid.
CapacitaryPotential capacitary_potential(const GridPtr& sigma, const ComplementCap& cap, const OperatorSpec& spec,
                                         int sign, double m, const SolveOptions& options = {});

PotentialCheck check_potential(const Field& u, const std::vector<std::size_t>& e_nodes, const SolveReport& report,
                               int sign, double m, const SolveOptions& options);

struct WienerProbeConfig {
  Vec y{};
  double m = 1.0;
  double rho0 = 0.0;
  double r0 = 0.0;
  int K = 3;
  std::vector<double> h_levels;
  double decay = 0.1;
  double stagnation = 0.25;
  /// A radius counts on a level when r >= min_radius_cells * h.
  double min_radius_cells = 2.0;
  SigmaPlacement placement = SigmaPlacement::enclosing;
  SolveOptions solve;
  /// Interpolate each level's potential onto the next (h halves) as a starting guess.
  bool coarse_to_fine = true;

  [[nodiscard]] std::vector<double> radii() const;
  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

struct ProbeLevel {
  double h = 0.0;
  std::vector<double> omega;    ///< NaN where the radius is not representable
  std::vector<double> deficit;  ///< m - inf u over Omega n I(y, r_k)
  std::vector<bool> used;
  double deficit_near_y = 0.0;  ///< m - inf u over the Omega nodes within sqrt(N) h of y
  double deficit_fixed = 0.0;   ///< deficit at the stagnation radius
  std::size_t cap_nodes = 0;
  double cap_density = 0.0;
  std::size_t sigma_nodes = 0;
  SolveReport report;
  PotentialCheck check;
  Field u;
};

enum class Verdict : std::uint8_t { regular_trend, irregular_trend, inconclusive };
std::string verdict_name(Verdict v);

struct RegularityReport {
  WienerProbeConfig config;
  std::vector<double> radii;
  std::vector<ProbeLevel> levels;
  double stagnation_radius = 0.0;
  /// Densities sigma(2 r_k) of the complement on the finest level (NaN if 2 r_k >= R/2).
  std::vector<double> density_2r;
  std::vector<double> sigma_hat_2r;
  double decay_ratio = 0.0;  ///< omega(r_K) / omega(r_0) on the finest level
  bool decay_ok = false;
  bool near_deficit_shrinks = false;
  bool stagnates = false;
  bool potentials_ok = true;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;
  std::vector<std::string> diagnostics;
};

/// Capacitary-potential probe of boundary regularity at y over several grid levels.
RegularityReport wiener_probe(const ShapeSpec& omega, const OperatorSpec& spec, const WienerProbeConfig& config);

struct BarrierReport {
  bool condition_j = false;     ///< V >= m - tol on boundary nodes outside I(y, rho)
  bool nonnegative = false;     ///< V >= -tol everywhere
  bool condition_jj = false;    ///< M(delta) nonincreasing and M(delta_last) <= decay M(delta_0)
  std::vector<double> deltas;
  std::vector<double> max_v;    ///< M(delta) = max V over Omega n I(y, delta)
  double ratio = 0.0;
  SolveReport v_report;
  SolveReport u_report;
};

struct Barrier {
  Field V;
  Field U;
  BarrierReport report;
};

/// V solves the Dirichlet problem with data m|x - y|^2 / rho^2, U with the negated data.
Barrier barrier_build(const GridPtr& omega, const OperatorSpec& spec, const Vec& y, double rho, double m,
                      const std::vector<double>& deltas, double decay, const SolveOptions& options = {});

struct LocalityReport {
  bool shapes_agree = false;
  RegularityReport first;
  RegularityReport second;
  bool passed = false;
};

/// Throws std::invalid_argument if the shapes' node labels differ inside I(y, r) on the finest level.
LocalityReport locality_check(const ShapeSpec& omega, const ShapeSpec& lambda, double r, const OperatorSpec& spec,
                              const WienerProbeConfig& config);

/// Index of the lattice node at y; throws if y is not a lattice point of the grid.
std::size_t node_at(const GridDomain& grid, const Vec& y);

}  // namespace potlab
