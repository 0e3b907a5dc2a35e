#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "potlab/operator.hpp"

namespace potlab {
namespace {

GridPtr small_box(double h = 0.125) { return build_grid({2, Shape(Box{{0, 0, 0}, {1, 1, 0}})}, h); }

Field random_field(const GridPtr& g, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-scale, scale);
  Field u(g);
  for (double& v : u.values) v = U(rng);
  return u;
}

TEST(ApplyA, SpecExamples) {
  for (double t : {1.5, 2.0, 3.0}) {
    EXPECT_EQ(apply_A(OperatorSpec::p_laplace(t), {0, 0, 0}), (Vec{0, 0, 0}));
    EXPECT_EQ(apply_A(OperatorSpec::regularized(t), {0, 0, 0}), (Vec{0, 0, 0}));
  }
  const Vec a = apply_A(OperatorSpec::p_laplace(3.0), {2, 0, 0});
  EXPECT_DOUBLE_EQ(a[0], 4.0);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  const Vec p{0.3, -1.7, 2.2};
  EXPECT_EQ(apply_A(OperatorSpec::regularized(2.0), p), p);
}

TEST(ApplyA, DegenerateGradientStaysFinite) {
  const auto s = OperatorSpec::p_laplace(1.5);
  const Vec a = apply_A(s, {1e-300, 0, 0});
  EXPECT_TRUE(std::isfinite(a[0]));
  EXPECT_TRUE(std::isfinite(radial_phi(s, 0.0)));
}

TEST(ApplyA, PLaplaceIsPositivelyHomogeneous) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  for (double t : {1.5, 2.0, 3.0, 4.5}) {
    const auto spec = OperatorSpec::p_laplace(t);
    EXPECT_TRUE(spec.homogeneous);
    EXPECT_TRUE(spec.odd_symmetric);
    for (int i = 0; i < 200; ++i) {
      const Vec p{g(rng), g(rng), g(rng)};
      const Vec ap = apply_A(spec, p);
      for (double s : {0.5, 2.0, 10.0}) {
        const Vec lhs = apply_A(spec, s * p);
        const Vec rhs = std::pow(s, t - 1.0) * ap;
        EXPECT_LE(norm(lhs - rhs), 1e-12 * norm(rhs)) << "t=" << t << " s=" << s;
      }
    }
  }
  EXPECT_FALSE(OperatorSpec::regularized(3.0).homogeneous);
}

TEST(Assumptions, BuiltInKindsAreMonotoneOnTenThousandPairs) {
  for (double t : {1.5, 2.0, 3.0}) {
    for (int dim : {2, 3}) {
      const auto rep = check_assumptions(OperatorSpec::p_laplace(t), dim, 10000, 42);
      EXPECT_TRUE(rep.passed) << "p_laplace t=" << t << " " << (rep.violations.empty() ? "" : rep.violations[0].check);
      const auto reg = check_assumptions(OperatorSpec::regularized(t), dim, 10000, 43);
      EXPECT_TRUE(reg.passed) << "regularized t=" << t << " " << (reg.violations.empty() ? "" : reg.violations[0].check);
    }
  }
}

TEST(Assumptions, ReversedFieldFailsWithWitness) {
  const auto spec = OperatorSpec::custom([](const Vec& p) { return -p; }, 2.0);
  const auto rep = check_assumptions(spec, 2, 50, 7);
  EXPECT_FALSE(rep.passed);
  ASSERT_FALSE(rep.violations.empty());
  const auto& v = rep.violations.front();
  EXPECT_EQ(v.check, "monotonicity");
  EXPECT_LE(dot(-v.p + v.q, v.p - v.q), 0.0);
}

TEST(Assumptions, RegularizedConstantDependsOnEllipticity) {
  auto spec = OperatorSpec::regularized(3.0);
  EXPECT_DOUBLE_EQ(spec.p0, 1.0);
  EXPECT_DOUBLE_EQ(spec.a, 1.0 / std::sqrt(2.0));
  EXPECT_TRUE(check_assumptions(spec, 2, 5000, 9).passed);
  spec.a = 1.0;
  const auto rep = check_assumptions(spec, 2, 5000, 9);
  EXPECT_FALSE(rep.passed);
  ASSERT_FALSE(rep.violations.empty());
  EXPECT_EQ(rep.violations.front().check, "growth");
}

TEST(Energy, ConstantFieldHasZeroEnergy) {
  const auto g = small_box();
  for (double t : {1.5, 2.0, 3.0}) EXPECT_EQ(energy(OperatorSpec::p_laplace(t), Field(g, 5.0)), 0.0);
}

TEST(Energy, LinearFieldOnUnitBox) {
  const auto g = small_box();
  Field u(g);
  for (std::size_t i = 0; i < g->size(); ++i) u[i] = g->position(i)[0];
  for (double t : {1.5, 2.0, 3.0}) {
    for (auto scheme : {GradientScheme::corner, GradientScheme::cell_average}) {
      auto spec = OperatorSpec::p_laplace(t);
      spec.scheme = scheme;
      EXPECT_NEAR(energy(spec, u), 1.0 / t, 1e-13) << "t=" << t;
    }
  }
}

TEST(Energy, MatchesIndependentSummation) {
  const auto g = small_box(1.0 / 16);
  const Field u = random_field(g, 5, 0.1);
  for (double t : {1.5, 2.0, 3.0}) {
    for (auto scheme : {GradientScheme::corner, GradientScheme::cell_average}) {
      auto spec = OperatorSpec::p_laplace(t);
      spec.scheme = scheme;
      const CellStencil st(2, g->h(), scheme);
      const auto& cells = g->active_cells();
      long double sum = 0.0L;
      for (auto it = cells.rbegin(); it != cells.rend(); ++it) {
        for (int s = st.count() - 1; s >= 0; --s) {
          const Vec grad = cell_gradient(*g, st, *it, s, u.values);
          sum += static_cast<long double>(st.weight() * std::pow(norm(grad), t) / t);
        }
      }
      const double oracle = static_cast<double>(sum) * g->h() * g->h();
      EXPECT_NEAR(energy(spec, u), oracle, 1e-12 * oracle);
    }
  }
}

TEST(Energy, NonPotentialOperatorIsRefused) {
  const auto spec = OperatorSpec::custom([](const Vec& p) { return p; }, 2.0);
  try {
    energy(spec, Field(small_box()));
    FAIL() << "expected an error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("energy undefined; use weak_residual"), std::string::npos);
  }
}

TEST(Residual, ConstantFieldHasZeroResidual) {
  const auto g = small_box();
  for (double t : {1.5, 2.0, 3.0}) {
    const Field r = weak_residual(OperatorSpec::p_laplace(t), Field(g, -2.5));
    for (double v : r.values) EXPECT_EQ(v, 0.0);
  }
}

TEST(Residual, IsTheEnergyGradient) {
  const auto g = small_box(0.125);
  for (double t : {1.5, 2.0, 3.0}) {
    for (auto scheme : {GradientScheme::corner, GradientScheme::cell_average}) {
      for (bool reg : {false, true}) {
        auto spec = reg ? OperatorSpec::regularized(t) : OperatorSpec::p_laplace(t);
        spec.scheme = scheme;
        Field u = random_field(g, 17);
        const Field r = weak_residual(spec, u);
        double scale = 0.0;
        for (std::size_t i : g->interior_nodes()) scale = std::max(scale, std::abs(r[i]));
        const double step = 1e-6;
        for (std::size_t i : g->interior_nodes()) {
          const double keep = u[i];
          u[i] = keep + step;
          const double ep = energy(spec, u);
          u[i] = keep - step;
          const double em = energy(spec, u);
          u[i] = keep;
          const double fd = (ep - em) / (2.0 * step);
          EXPECT_NEAR(r[i], fd, 1e-6 * std::max(scale, std::abs(fd))) << "t=" << t << " node " << i;
        }
        for (std::size_t i : g->boundary_nodes()) EXPECT_EQ(r[i], 0.0);
      }
    }
  }
}

TEST(Residual, ConeFunctionSign) {
  // w = alpha |x - y| + beta with y outside Omega: alpha > 0 is a subsolution.
  const auto g = small_box(1.0 / 32);
  const Vec y{-0.5, 0.3, 0};
  for (double t : {1.5, 2.0, 3.0}) {
    const auto spec = OperatorSpec::p_laplace(t);
    for (double alpha : {2.0, -2.0}) {
      Field w(g);
      for (std::size_t i = 0; i < g->size(); ++i) w[i] = alpha * norm(g->position(i) - y) + 0.7;
      const Field r = weak_residual(spec, w);
      for (std::size_t i : g->interior_nodes()) {
        if (alpha > 0) {
          EXPECT_LE(r[i], 1e-12) << "t=" << t;
        } else {
          EXPECT_GE(r[i], -1e-12) << "t=" << t;
        }
      }
    }
  }
}

TEST(Reflect, OddOperatorIsUnchanged) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& spec : {OperatorSpec::p_laplace(3.0), OperatorSpec::regularized(1.5)}) {
    const auto r = reflect(spec);
    EXPECT_DOUBLE_EQ(r.t, spec.t);
    EXPECT_DOUBLE_EQ(r.a, spec.a);
    EXPECT_DOUBLE_EQ(r.p0, spec.p0);
    for (int i = 0; i < 100; ++i) {
      const Vec p{g(rng), g(rng), 0};
      EXPECT_EQ(apply_A(r, p), apply_A(spec, p));
    }
  }
}

TEST(Reflect, ShiftedFieldAndInvolution) {
  const auto spec = OperatorSpec::custom([](const Vec& p) { return p + Vec{1, 0, 0}; }, 2.0);
  const auto r = reflect(spec);
  const auto rr = reflect(r);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec p{g(rng), g(rng), 0};
    const Vec b = apply_A(r, p);
    EXPECT_DOUBLE_EQ(b[0], p[0] - 1.0);
    EXPECT_DOUBLE_EQ(b[1], p[1]);
    EXPECT_EQ(apply_A(rr, p), apply_A(spec, p));
  }
}

TEST(Reflect, MapsResidualOfUToMinusResidualOfMinusU) {
  const auto g = small_box(1.0 / 16);
  const auto spec = OperatorSpec::custom(
      [](const Vec& p) { return Vec{p[0] + 0.3 * std::abs(p[1]), 2.0 * p[1] + std::pow(std::abs(p[0]), 1.5), 0}; }, 2.0);
  const Field u = random_field(g, 23);
  Field minus_u(g);
  for (std::size_t i = 0; i < g->size(); ++i) minus_u[i] = -u[i];
  const Field rb = weak_residual(reflect(spec), u);
  const Field ra = weak_residual(spec, minus_u);
  for (std::size_t i : g->interior_nodes()) EXPECT_EQ(rb[i], -ra[i]);
}

TEST(Stencil, SchemeNamesRoundTrip) {
  for (auto s : {GradientScheme::corner, GradientScheme::cell_average}) EXPECT_EQ(scheme_from_name(scheme_name(s)), s);
  EXPECT_THROW(scheme_from_name("upwind"), std::invalid_argument);
  EXPECT_THROW(OperatorSpec::p_laplace(1.0), std::invalid_argument);
}

}  // namespace
}  // namespace potlab
