#pragma once

// Level-set instrumentation of computed potentials: sublevel statistics, the
// Caccioppoli ratio, the psi recursion and oscillation-decay bookkeeping.

#include <optional>
#include <vector>

#include "potlab/grid.hpp"
#include "potlab/operator.hpp"

namespace potlab {

struct DeGiorgiConstants {
  double theta = 0.0;                  // theta^2 = theta + t/N
  double beta = 0.0;                   // (t + N theta) / (theta - 1)
  std::optional<double> theta1;        // theta1^2 = theta1 + t/(N - t), only for t < N
};

DeGiorgiConstants degiorgi_constants(double t, int n);

/// Sublevel statistics over Omega(y, rho), the non-exterior nodes of u's grid in the closed
/// ball. Integrals use the nodal quadrature h^N per node.
struct LevelSetStats {
  double k = 0.0;
  double rho = 0.0;
  double b = 0.0;      // |{u <= k}|
  double u_int = 0.0;  // integral of (k - u)^t over that set
  double psi = 0.0;    // u_int^{theta N / t} b
  std::size_t nodes = 0;
};

LevelSetStats level_stats(const Field& u, const Vec& y, double k, double rho, double t);

struct CaccioppoliResult {
  double k = 0.0;
  double rho = 0.0;
  double R = 0.0;
  double lhs = 0.0;    // integral over B(k, R) of |grad u|^t phi^t
  double rhs = 0.0;    // integral over B(k, R) of |u - k|^t
  double c_emp = 0.0;  // lhs / ((R - rho)^{-t} rhs)
  bool violation = false;
};

/// phi is the radial piecewise-linear cutoff (1 inside rho, 0 outside R) sampled at cell
/// centres; gradients are the solver's sub-gradients.
CaccioppoliResult check_caccioppoli(const Field& u, const OperatorSpec& spec, const Vec& y, double k, double rho,
                                    double R, double tol = 1e-12);

/// r_m = r0/2 + r0/2^{m+1}, k_m = k0 - d + d/2^m.
struct IterationSchedule {
  Vec y{};
  double r0 = 0.0;
  double k0 = 0.0;
  double d = 0.0;
  int steps = 24;

  [[nodiscard]] double radius(int m) const;
  [[nodiscard]] double level(int m) const;
};

struct PsiRecursionReport {
  std::vector<LevelSetStats> levels;
  double theta = 0.0;
  double beta = 0.0;
  /// Smallest c with psi_{m+1} <= c (r_m - r_{m+1})^{-N theta} (k_m - k_{m+1})^{-t} psi_m^theta.
  double c_hat = 0.0;
  /// max over m of psi_m / (psi_0 2^{-beta m}).
  double max_decay_ratio = 0.0;
  bool decay_ok = false;  // max_decay_ratio <= slack
  bool monotone = true;   // psi_m nonincreasing
  int usable = 0;         // levels with psi > 0
  bool truncated = false; // fewer than 3 usable levels
  double b_final = 0.0;   // b(k0 - d, r0 / 2)
};

PsiRecursionReport check_psi_recursion(const Field& u, double t, const IterationSchedule& schedule, double slack = 10.0);

/// Smallest d for which the psi induction closes with constant c_hat:
/// d = (c_hat 2^{beta theta})^{1/t} (r0/2)^{-N theta/t} psi0^{(theta-1)/t}.
double psi_threshold_d(double c_hat, double t, int n, double r0, double psi0);

/// Raises d to the threshold of its own fitted c_hat until the induction closes
/// (threshold <= d). The fitted constant depends on d, hence the iteration.
struct PsiThreshold {
  double d = 0.0;
  bool closed = false;
  int iterations = 0;
  PsiRecursionReport report;
};

PsiThreshold psi_threshold_search(const Field& u, double t, IterationSchedule schedule, int max_iterations = 60);

struct OscillationSample {
  double r = 0.0;
  double inf = 0.0;
  double sup = 0.0;
  double omega = 0.0;
  bool used = false;  // false when Omega(y, r) holds no node
};

/// inf, sup and oscillation over the non-exterior nodes in I(y, r_k), r_k = 4^-k r0.
std::vector<OscillationSample> oscillation_sequence(const Field& u, const Vec& y, double r0, int K);

struct DecayOptions {
  double C1 = 1.0;
  double slack = 2.0;
  /// Use omega(r) <= omega(4r)/2 + (c + 1/eta) r instead of the product envelope.
  bool lower_order = false;
  double lower_order_c = 0.0;
};

struct DecayStep {
  int k = 0;
  double r = 0.0;
  double sigma = 0.0;  // at 2 r_k
  double n0 = 0.0;     // +inf when sigma = 0
  double eta = 0.0;
  double factor = 1.0;
  double envelope = 0.0;
  double omega = 0.0;
  bool below = true;
  /// sigma(2r)^{t/(t-1)} - C1 log 2 / log log (1/(2r)); NaN when 2r >= 1/e.
  double density_margin = 0.0;
};

struct DecayReport {
  std::vector<DecayStep> steps;
  bool passed = false;
  bool n0_bounds_ok = false;
};

/// sigma_2r[k] and omega[k] for k = 0..K; step 0 carries omega(r0) only.
DecayReport n0_and_decay(const std::vector<double>& sigma_2r, double t, double r0, const std::vector<double>& omega,
                         const DecayOptions& options = {});

/// log of prod_{k=1}^{K} (1 - eta_k / 4) with eta_k = 1 / (4 (k log 4 - log(2 r0))).
double divergence_log_product(double r0, long K);

}  // namespace potlab
