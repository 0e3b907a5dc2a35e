#include "potlab/operator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace potlab {

std::string scheme_name(GradientScheme s) { return s == GradientScheme::corner ? "corner" : "cell_average"; }

GradientScheme scheme_from_name(const std::string& name) {
  if (name == "corner") return GradientScheme::corner;
  if (name == "cell_average") return GradientScheme::cell_average;
  throw std::invalid_argument("unknown gradient scheme '" + name + "'");
}

CellStencil::CellStencil(int dim, double h, GradientScheme scheme) : dim_(dim) {
  const int nc = 1 << dim;
  if (scheme == GradientScheme::cell_average) {
    count_ = 1;
    weight_ = 1.0;
    const double scale = 1.0 / (static_cast<double>(1 << (dim - 1)) * h);
    for (int b = 0; b < nc; ++b) {
      touches_[0][b] = true;
      for (int k = 0; k < dim; ++k) coeff_[0][b][k] = (b & (1 << k)) ? scale : -scale;
    }
    return;
  }
  count_ = nc;
  weight_ = 1.0 / nc;
  for (int s = 0; s < nc; ++s) {
    for (int k = 0; k < dim; ++k) {
      const int up = s | (1 << k);
      const int down = s & ~(1 << k);
      coeff_[s][up][k] = 1.0 / h;
      coeff_[s][down][k] = -1.0 / h;
      touches_[s][up] = touches_[s][down] = true;
    }
  }
}

OperatorSpec OperatorSpec::p_laplace(double t, double eps) {
  if (!(t > 1.0)) throw std::invalid_argument("exponent t must exceed 1");
  if (!(eps >= 0.0)) throw std::invalid_argument("regularization eps must be nonnegative");
  OperatorSpec s;
  s.kind = OperatorKind::p_laplace;
  s.t = t;
  s.eps = eps;
  s.homogeneous = eps == 0.0;
  return s;
}

OperatorSpec OperatorSpec::regularized(double t) {
  if (!(t > 1.0)) throw std::invalid_argument("exponent t must exceed 1");
  OperatorSpec s;
  s.kind = OperatorKind::regularized;
  s.t = t;
  s.homogeneous = false;
  // For |p| >= 1 the factor ((1 + |p|^2) / |p|^2)^{(t-2)/2} lies between 1 and 2^{(t-2)/2}.
  if (t != 2.0) {
    s.a = std::pow(2.0, -std::abs(t - 2.0) / 2.0);
    s.p0 = 1.0;
  }
  return s;
}

OperatorSpec OperatorSpec::custom(std::function<Vec(const Vec&)> field, double t, double a, double p0,
                                  std::function<double(const Vec&)> potential) {
  if (!(t > 1.0)) throw std::invalid_argument("exponent t must exceed 1");
  OperatorSpec s;
  s.kind = OperatorKind::custom;
  s.t = t;
  s.a = a;
  s.p0 = p0;
  s.odd_symmetric = false;
  s.homogeneous = false;
  s.custom_field = std::move(field);
  s.custom_potential = std::move(potential);
  return s;
}

bool OperatorSpec::has_potential() const { return kind != OperatorKind::custom || static_cast<bool>(custom_potential); }

std::string OperatorSpec::kind_name() const {
  switch (kind) {
    case OperatorKind::p_laplace:
      return "p_laplace";
    case OperatorKind::regularized:
      return "regularized";
    case OperatorKind::custom:
      return "custom";
  }
  return "unknown";
}

double radial_phi(const OperatorSpec& spec, double q) {
  const double t = spec.t;
  if (t == 2.0) return 1.0;
  double base = spec.kind == OperatorKind::regularized ? 1.0 + q : spec.eps * spec.eps + q;
  if (t < 2.0) base = std::max(base, kGradientFloor * kGradientFloor);
  if (t == 3.0) return std::sqrt(base);
  if (t == 4.0) return base;
  return std::pow(base, 0.5 * (t - 2.0));
}

double radial_dphi(const OperatorSpec& spec, double q) {
  const double t = spec.t;
  if (t == 2.0) return 0.0;
  double base = spec.kind == OperatorKind::regularized ? 1.0 + q : spec.eps * spec.eps + q;
  if (t < 2.0 && base < kGradientFloor * kGradientFloor) return 0.0;
  if (t == 4.0) return 1.0;
  if (t == 3.0) return base > 0.0 ? 0.5 / std::sqrt(base) : 0.0;
  if (base <= 0.0) return 0.0;
  return 0.5 * (t - 2.0) * std::pow(base, 0.5 * (t - 4.0));
}

namespace {

Vec base_field(const OperatorSpec& spec, const Vec& p) {
  if (spec.kind == OperatorKind::custom) {
    if (!spec.custom_field) throw std::invalid_argument("custom operator without a field");
    return spec.custom_field(p);
  }
  const double q = dot(p, p);
  if (q == 0.0) return {0.0, 0.0, 0.0};
  return radial_phi(spec, q) * p;
}

double base_potential(const OperatorSpec& spec, const Vec& p) {
  if (spec.kind == OperatorKind::custom) {
    if (!spec.custom_potential) throw std::domain_error("energy undefined; use weak_residual");
    return spec.custom_potential(p) - spec.custom_potential(Vec{});
  }
  const double q = dot(p, p);
  const double t = spec.t;
  const double c = spec.kind == OperatorKind::regularized ? 1.0 : spec.eps * spec.eps;
  if (t == 2.0) return 0.5 * q;
  if (c == 0.0) return std::pow(q, 0.5 * t) / t;
  return (std::pow(c + q, 0.5 * t) - std::pow(c, 0.5 * t)) / t;
}

}  // namespace

Vec apply_A(const OperatorSpec& spec, const Vec& p) {
  if (spec.reflected) return -base_field(spec, -p);
  return base_field(spec, p);
}

double potential(const OperatorSpec& spec, const Vec& p) {
  return spec.reflected ? base_potential(spec, -p) : base_potential(spec, p);
}

OperatorSpec reflect(const OperatorSpec& spec) {
  OperatorSpec r = spec;
  r.reflected = !spec.reflected;
  return r;
}

AssumptionReport check_assumptions(const OperatorSpec& spec, int dim, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  AssumptionReport rep;
  rep.samples = samples;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double lo = std::log(std::max(spec.p0, 1e-3));
  const double hi = std::log(1e3);
  std::uniform_real_distribution<double> logmag(lo, hi);

  auto draw = [&]() {
    Vec d{};
    do {
      for (int k = 0; k < dim; ++k) d[k] = gauss(rng);
    } while (dot(d, d) == 0.0);
    return std::exp(logmag(rng)) * normalized(d);
  };
  auto record = [&](const char* what, const Vec& p, const Vec& q, double lhs, double rhs) {
    rep.passed = false;
    rep.violations.push_back({what, p, q, lhs, rhs});
  };

  constexpr double kRel = 1e-12;
  for (int i = 0; i < samples; ++i) {
    const Vec p = draw();
    const Vec q = draw();
    const Vec ap = apply_A(spec, p);
    const Vec aq = apply_A(spec, q);
    const double mono = dot(ap - aq, p - q);
    if (!(mono > 0.0)) record("monotonicity", p, q, mono, 0.0);

    const double np = norm(p);
    const double coer = dot(ap, p);
    const double coer_rhs = spec.a * std::pow(np, spec.t);
    if (coer < coer_rhs * (1.0 - kRel)) record("coercivity", p, q, coer, coer_rhs);

    const double growth = norm(ap);
    const double growth_rhs = std::pow(np, spec.t - 1.0) / spec.a;
    if (growth > growth_rhs * (1.0 + kRel)) record("growth", p, q, growth, growth_rhs);
  }
  return rep;
}

Vec cell_gradient(const GridDomain& grid, const CellStencil& st, std::size_t cell, int s,
                  const std::vector<double>& u) {
  Vec g{};
  for (int b = 0; b < st.corners(); ++b) {
    if (!st.touches(s, b)) continue;
    g = g + u[cell + grid.corner_offset(b)] * st.coeff(s, b);
  }
  return g;
}

double energy(const OperatorSpec& spec, const Field& u) {
  if (!spec.has_potential()) throw std::domain_error("energy undefined; use weak_residual");
  const GridDomain& grid = *u.grid;
  const CellStencil st(grid.dim(), grid.h(), spec.scheme);
  double e = 0.0;
  for (std::size_t c : grid.active_cells()) {
    for (int s = 0; s < st.count(); ++s) e += potential(spec, cell_gradient(grid, st, c, s, u.values));
  }
  return e * st.weight() * std::pow(grid.h(), grid.dim());
}

Field weak_residual(const OperatorSpec& spec, const Field& u) {
  const GridDomain& grid = *u.grid;
  const CellStencil st(grid.dim(), grid.h(), spec.scheme);
  const double w = st.weight() * std::pow(grid.h(), grid.dim());
  Field r(u.grid, 0.0);
  for (std::size_t c : grid.active_cells()) {
    for (int s = 0; s < st.count(); ++s) {
      const Vec a = apply_A(spec, cell_gradient(grid, st, c, s, u.values));
      for (int b = 0; b < st.corners(); ++b) {
        if (st.touches(s, b)) r[c + grid.corner_offset(b)] += w * dot(a, st.coeff(s, b));
      }
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.is_interior(i)) r[i] = 0.0;
  }
  return r;
}

}  // namespace potlab
