#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "potlab/grid.hpp"
#include "potlab/operator.hpp"

namespace potlab {

/// Boundary values as a function of position. `tag` names the closed form, if any.
struct BoundaryData {
  std::function<double(const Vec&)> fn;
  std::string tag;

  static BoundaryData constant(double c);
  double operator()(const Vec& x) const { return fn(x); }
};

enum class SweepOrder : std::uint8_t { lexicographic, red_black };

struct SolveOptions {
  double tol_u = 1e-8;
  double tol_r = 1e-8;
  long max_sweeps = 100000;
  SweepOrder order = SweepOrder::lexicographic;
  /// Over-relaxation factor; 0 picks 2 / (1 + pi h / D) from the interior diameter D, 1 is plain Gauss-Seidel.
  double relaxation = 0.0;
  /// Start from the t = 2 solution (Dirichlet) or the t = 2 solution with E fixed (obstacle).
  bool linear_warm_start = true;
  /// For t != 2, run damped Newton (CG inner solves) before the sweeps.
  bool newton_warm_start = true;
  /// Explicit initial values for every node (overrides the warm start); boundary and
  /// obstacle values are re-imposed.
  std::optional<std::vector<double>> initial;
};

struct SolveReport {
  long iterations = 0;
  double energy = 0.0;
  double max_update = 0.0;
  double max_residual = 0.0;
  /// Most negative residual on nodes held at the obstacle (0 if none).
  double min_obstacle_residual = 0.0;
  double contraction = 0.0;
  double relaxation = 1.0;
  bool converged = false;
  bool energy_monotone = true;
  double wall_time = 0.0;
  std::vector<double> energy_history;
  std::string note;
};

/// Node set E (indices into the solve grid, all interior), level m > 0 and sign.
struct ObstacleConstraint {
  std::vector<std::size_t> nodes;
  double m = 1.0;
  int sign = +1;
};

struct Solution {
  Field u;
  SolveReport report;
};

/// Minimizes the discrete energy with u = phi on boundary nodes.
Solution solve_dirichlet(const GridPtr& grid, const OperatorSpec& spec, const BoundaryData& phi,
                         const SolveOptions& options = {});

/// Minimizes the discrete energy over {u = 0 on the grid boundary, sign * u >= m on E}.
Solution solve_obstacle(const GridPtr& grid, const ObstacleConstraint& constraint, const OperatorSpec& spec,
                        const SolveOptions& options = {});

/// Values for every node of `fine` interpolated multilinearly from `coarse`
/// (spacing exactly twice as large). Nodes not covered get `fallback`.
std::vector<double> prolongate(const Field& coarse, const GridDomain& fine, double fallback = 0.0);

enum class Mollifier : std::uint8_t { bump, cube };

struct GeneralizedStep {
  int k = 0;
  double width = 0.0;
  double sup_change = 0.0;     ///< sup over Omega of |u_k - u_{k-1}|
  double data_change = 0.0;    ///< sup over the boundary of |phi_k - phi_{k-1}|
  bool contraction_ok = true;  ///< sup_change <= data_change + 2 tol
  SolveReport report;
};

struct GeneralizedSolution {
  Field u;
  std::vector<GeneralizedStep> steps;
  bool contraction_ok = true;
};

/// Averages phi over balls of radius 2^-k diam (k = 1..n), solves each problem and logs
/// successive differences. Throws std::runtime_error if an inner solve fails.
GeneralizedSolution generalized_solution(const GridPtr& grid, const OperatorSpec& spec, const BoundaryData& phi,
                                         int n, const SolveOptions& options = {},
                                         Mollifier family = Mollifier::bump);

/// Mollified data: weighted average of phi over the ball of radius `width` about x.
double mollify(const BoundaryData& phi, const Vec& x, double width, int dim, Mollifier family);

struct ComparisonReport {
  bool max_principle = true;  ///< min phi - tol <= u <= max phi + tol, same for v
  bool ordered = true;        ///< phi <= psi on the boundary implies u <= v + 2 tol
  bool contraction = true;    ///< sup |u - v| <= sup |phi - psi| + 2 tol
  bool data_ordered = false;
  double max_principle_excess = 0.0;
  double order_excess = 0.0;
  double sup_difference = 0.0;
  double sup_data_difference = 0.0;
  [[nodiscard]] bool passed() const { return max_principle && ordered && contraction; }
};

/// u and v must come from solves on the same grid; their boundary values are the data.
ComparisonReport verify_comparison(const Field& u, const Field& v, double tol);

}  // namespace potlab
