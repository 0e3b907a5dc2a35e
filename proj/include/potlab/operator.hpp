#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "potlab/grid.hpp"
#include "potlab/vec.hpp"

namespace potlab {

enum class OperatorKind : std::uint8_t { p_laplace, regularized, custom };

/// How a cell's nodal values turn into discrete gradients.
///
/// cell_average: one gradient per cell, the average of the forward differences along
///   each axis (2^{N-1} edges per axis).
/// corner: one gradient per cell corner built from the N cell edges meeting there,
///   each weighted 2^-N. At t = 2 this is the standard (2N+1)-point Laplacian.
enum class GradientScheme : std::uint8_t { cell_average, corner };

std::string scheme_name(GradientScheme s);
GradientScheme scheme_from_name(const std::string& name);

/// Coefficients of the discrete gradients of one lattice cell.
class CellStencil {
 public:
  CellStencil(int dim, double h, GradientScheme scheme);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int corners() const { return 1 << dim_; }
  [[nodiscard]] int count() const { return count_; }
  /// Quadrature weight of each sub-gradient as a fraction of the cell volume.
  [[nodiscard]] double weight() const { return weight_; }
  /// d g_s / d u_b.
  [[nodiscard]] const Vec& coeff(int s, int b) const { return coeff_[s][b]; }
  [[nodiscard]] bool touches(int s, int b) const { return touches_[s][b]; }

 private:
  int dim_;
  int count_;
  double weight_;
  std::array<std::array<Vec, 8>, 8> coeff_{};
  std::array<std::array<bool, 8>, 8> touches_{};
};

/// Gradient magnitudes below this are raised to it where |p|^{t-2} would blow up.
inline constexpr double kGradientFloor = 1e-12;

/// The monotone field A(p) of L u = div A(grad u).
///
/// p_laplace:   A(p) = (eps^2 + |p|^2)^{(t-2)/2} p,  W(p) = (eps^2 + |p|^2)^{t/2} / t
/// regularized: A(p) = (1 + |p|^2)^{(t-2)/2} p,      W(p) = (1 + |p|^2)^{t/2} / t
/// custom:      user supplied A and optionally its potential W.
struct OperatorSpec {
  OperatorKind kind = OperatorKind::p_laplace;
  double t = 2.0;
  double a = 1.0;
  double p0 = 0.0;
  double eps = 0.0;
  bool odd_symmetric = true;
  bool homogeneous = true;
  /// Evaluate B(p) = -A(-p) instead of A.
  bool reflected = false;
  GradientScheme scheme = GradientScheme::corner;
  std::function<Vec(const Vec&)> custom_field;
  std::function<double(const Vec&)> custom_potential;

  static OperatorSpec p_laplace(double t, double eps = 0.0);
  static OperatorSpec regularized(double t);
  static OperatorSpec custom(std::function<Vec(const Vec&)> field, double t, double a = 1.0, double p0 = 0.0,
                             std::function<double(const Vec&)> potential = {});

  [[nodiscard]] bool has_potential() const;
  /// True for kinds with A(p) = phi(|p|^2) p.
  [[nodiscard]] bool is_radial() const { return kind != OperatorKind::custom; }
  [[nodiscard]] std::string kind_name() const;
};

Vec apply_A(const OperatorSpec& spec, const Vec& p);

/// W(p) - W(0). Throws std::domain_error for custom operators without a potential.
double potential(const OperatorSpec& spec, const Vec& p);

/// For radial kinds: phi(q) with A(p) = phi(|p|^2) p, and its derivative.
double radial_phi(const OperatorSpec& spec, double q);
double radial_dphi(const OperatorSpec& spec, double q);

OperatorSpec reflect(const OperatorSpec& spec);

struct AssumptionViolation {
  std::string check;
  Vec p{};
  Vec q{};
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AssumptionReport {
  bool passed = true;
  int samples = 0;
  std::vector<AssumptionViolation> violations;
};

/// Samples random pairs with |p|, |q| in [max(p0, 1e-3), 1e3] and checks strict
/// monotonicity, coercivity A(p).p >= a|p|^t and growth |A(p)| <= |p|^{t-1} / a.
AssumptionReport check_assumptions(const OperatorSpec& spec, int dim, int samples, std::uint64_t seed);

/// Sub-gradient s of the cell whose lowest corner is `cell`.
Vec cell_gradient(const GridDomain& grid, const CellStencil& st, std::size_t cell, int s, const std::vector<double>& u);

/// Sum over active cells and their sub-gradients of weight (W(g) - W(0)) h^N.
double energy(const OperatorSpec& spec, const Field& u);

/// residual_i = sum over cells and sub-gradients g of weight A(g) . dg/du_i h^N for
/// interior i; zero elsewhere. Supersolutions have residual >= 0.
Field weak_residual(const OperatorSpec& spec, const Field& u);

}  // namespace potlab
