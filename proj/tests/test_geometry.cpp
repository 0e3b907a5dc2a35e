#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "potlab/geometry.hpp"

namespace potlab {
namespace {

std::size_t node(const GridDomain& g, const Vec& y) {
  IVec l{};
  for (int k = 0; k < 3; ++k) l[k] = std::lround(y[k] / g.h());
  const auto i = g.index_of(l);
  if (!i) throw std::logic_error("not a node");
  return *i;
}

ShapeSpec half_plane_box() {
  return {2, Shape::intersect({Shape(HalfSpace{{1, 0, 0}, 0.0}), Shape(Box{{-2, -2, 0}, {2, 2, 0}})})};
}

ShapeSpec slit_disk() {
  return {2, Shape::difference(Shape(Ball{{0, 0, 0}, 2.0}), Shape(FlatCone{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 1.0}))};
}

TEST(ComplementCap, HalfPlaneDensityTendsToOneHalf) {
  double previous = 1.0;
  for (double h : {1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256}) {
    const auto g = build_grid(half_plane_box(), h);
    const auto cap = complement_cap(*g, node(*g, {0, 0, 0}), 0.5);
    const double err = std::abs(density(cap) - 0.5);
    EXPECT_LE(err, previous + 1e-12);
    previous = err;
  }
  EXPECT_LT(previous, 0.01);
}

TEST(ComplementCap, QuarterPlaneDensityTendsToOneQuarter) {
  const ShapeSpec s{2, Shape::difference(Shape(Ball{{0, 0, 0}, 4.0}), Shape(Box{{0, 0, 0}, {5, 5, 0}}))};
  const auto g = build_grid(s, 1.0 / 256);
  const auto cap = complement_cap(*g, node(*g, {0, 0, 0}), 0.5);
  EXPECT_NEAR(density(cap), 0.25, 0.01);
}

TEST(ComplementCap, SlitIsOneNodeLayer) {
  const double h = 1.0 / 64;
  const auto g = build_grid(slit_disk(), h);
  const double rho = 0.25;
  const auto cap = complement_cap(*g, node(*g, {0.5, 0, 0}), rho);
  EXPECT_EQ(cap.count(), 2 * static_cast<std::size_t>(std::lround(rho / h)) + 1);
  EXPECT_NEAR(cap.volume(), 2.0 * rho * h, 2.0 * h * h);
}

TEST(ComplementCap, FilledBallHasDensityNearOne) {
  // Omega is a small ball far from y; every node near y is in the complement.
  const ShapeSpec s{2, Shape::unite({Shape(Ball{{0, 0, 0}, 0.1}), Shape(Ball{{10, 0, 0}, 1.0})})};
  const auto g = build_grid(s, 1.0 / 64);
  const auto cap = complement_cap(*g, node(*g, {11.0, 0, 0}), 1.0);
  EXPECT_GT(density(cap), 0.45);
  const auto g2 = build_grid({2, Shape::unite({Shape(Ball{{0, 0, 0}, 0.05}), Shape(Ball{{10, 0, 0}, 1.0})})}, 1.0 / 64);
  const auto full = complement_cap(*g2, node(*g2, {0.0625, 0, 0}), 2.0);
  EXPECT_NEAR(density(full), 1.0, 0.02);
  EXPECT_LE(density(full), 1.0);
}

TEST(ComplementCap, InvariantsAndBruteForceDensity) {
  const auto g = build_grid(slit_disk(), 1.0 / 32);
  const std::size_t y = node(*g, {0.25, 0, 0});
  const Vec yc = g->position(y);
  std::size_t previous = 0;
  for (double rho : {0.05, 0.1, 0.2, 0.3, 0.45}) {
    const auto cap = complement_cap(*g, y, rho);
    EXPECT_GE(cap.count(), previous);
    previous = cap.count();
    std::size_t brute = 0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (norm(g->position(i) - yc) <= rho && !g->is_interior(i)) ++brute;
    }
    EXPECT_EQ(cap.count(), brute);
    for (const IVec& l : cap.nodes) {
      const auto i = g->index_of(l);
      ASSERT_TRUE(i.has_value());
      EXPECT_FALSE(g->is_interior(*i));
      EXPECT_LE(norm(g->position(*i) - yc), rho * (1 + 1e-12));
    }
    const double sigma = density(cap);
    EXPECT_GE(sigma, 0.0);
    EXPECT_LE(sigma, 1.0);
    EXPECT_DOUBLE_EQ(sigma, std::min(1.0, brute * std::pow(g->h(), 2) / (std::numbers::pi * rho * rho)));
    if (rho > 0.1) {
      const auto inner = complement_cap(*g, y, 0.5 * rho);
      for (const IVec& l : inner.nodes) EXPECT_TRUE(cap.contains(l));
    }
  }
}

TEST(ComplementCap, RejectsBadCentreAndRadius) {
  const auto g = build_grid(slit_disk(), 1.0 / 16);
  EXPECT_THROW(complement_cap(*g, node(*g, {-0.5, 0.5, 0}), 0.2), std::invalid_argument);
  EXPECT_THROW(complement_cap(*g, node(*g, {0.5, 0, 0}), 0.0), std::invalid_argument);
  EXPECT_THROW(complement_cap(*g, node(*g, {0.5, 0, 0}), 5.0), std::invalid_argument);
}

TEST(SolidAngle, SurroundedProbesSeeTheFullSphere) {
  const ShapeSpec s{2, Shape::unite({Shape(Ball{{0, 0, 0}, 0.1}), Shape(Ball{{10, 0, 0}, 1.0})})};
  const auto g = build_grid(s, 1.0 / 16);
  const auto cap = complement_cap(*g, node(*g, {0.125, 0, 0}), 2.0);
  const auto est = solid_angle_lower_bound(cap, {256, 32, 5});
  EXPECT_DOUBLE_EQ(est.value, 2.0 * std::numbers::pi);
  EXPECT_EQ(est.standard_error, 0.0);
}

TEST(SolidAngle, HalfPlaneGivesAtLeastHalfTheCircle) {
  const auto g = build_grid(half_plane_box(), 1.0 / 16);
  const auto cap = complement_cap(*g, node(*g, {0, 0, 0}), 0.5);
  const auto est = solid_angle_lower_bound(cap, {4096, 64, 11});
  EXPECT_GE(est.value + 4.0 * est.standard_error, std::numbers::pi);
  EXPECT_LE(est.value, 2.0 * std::numbers::pi);
}

TEST(SolidAngle, FlatConeIsPositiveAndSeedStable) {
  const ShapeSpec s{3, Shape::difference(Shape(Ball{{0, 0, 0}, 4.0}),
                                         Shape(FlatCone{{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, 1.0, 1.0}))};
  const auto g = build_grid(s, 0.25);
  const auto cap = complement_cap(*g, node(*g, {0, 0, 0}), 1.0);
  const auto a = solid_angle_lower_bound(cap, {2048, 64, 1});
  const auto b = solid_angle_lower_bound(cap, {2048, 64, 2});
  EXPECT_GT(a.value, 0.0);
  EXPECT_GT(b.value, 0.0);
  const double se = std::hypot(a.standard_error, b.standard_error);
  EXPECT_LE(std::abs(a.value - b.value), 3.0 * se + 0.1 * std::max(a.value, b.value));
  const auto again = solid_angle_lower_bound(cap, {2048, 64, 1});
  EXPECT_EQ(again.value, a.value);
}

TEST(SolidAngle, MonotoneInTheComplement) {
  const Shape disk(Ball{{0, 0, 0}, 2.0});
  const Shape slit(FlatCone{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 1.0});
  const Shape wedge = Shape::intersect({Shape(HalfSpace{{0, -1, 0}, 0.0}), Shape(HalfSpace{{-1, 0, 0}, 0.0})});
  const auto small = build_grid({2, Shape::difference(disk, slit)}, 1.0 / 16);
  const auto large = build_grid({2, Shape::difference(disk, Shape::unite({slit, wedge}))}, 1.0 / 16);
  const auto a = solid_angle_lower_bound(complement_cap(*small, node(*small, {0, 0, 0}), 0.5), {1024, 64, 3});
  const auto b = solid_angle_lower_bound(complement_cap(*large, node(*large, {0, 0, 0}), 0.5), {1024, 64, 3});
  EXPECT_LE(a.value, b.value + 3.0 * std::hypot(a.standard_error, b.standard_error));
}

TEST(SolidAngle, RejectsTooFewSamples) {
  const auto g = build_grid(half_plane_box(), 1.0 / 8);
  const auto cap = complement_cap(*g, node(*g, {0, 0, 0}), 0.5);
  EXPECT_THROW(solid_angle_lower_bound(cap, {kMinDirections - 1, 8, 1}), std::invalid_argument);
  EXPECT_THROW(solid_angle_lower_bound(cap, {64, kMinProbes - 1, 1}), std::invalid_argument);
}

TEST(SigmaHat, VolumetricAndAngularBranches) {
  EXPECT_DOUBLE_EQ(sigma_hat_lower_bound(2, 1.0, 0.0), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(sigma_hat_lower_bound(3, 0.0, unit_sphere_area(3)), unit_sphere_area(3));
  ComplementCap empty;
  empty.dim = 2;
  empty.h = 0.1;
  empty.radius = 1.0;
  EXPECT_EQ(sigma_hat_lower_bound(empty, 1.0), 0.0);
  for (double sigma : {0.0, 0.1, 0.5, 1.0}) {
    for (double angle : {0.0, 0.3, 5.0}) {
      for (int n : {2, 3}) {
        EXPECT_GE(sigma_hat_lower_bound(n, sigma, angle), sigma * unit_sphere_area(n) / std::pow(2.0, n));
      }
    }
  }
}

TEST(DensityCriterion, ConstantDensityHoldsForSmallRadii) {
  // sigma^2 = 0.09 exceeds 1 / log log (1/rho) once log(1/rho) > e^{11.2}.
  std::vector<DensitySample> samples;
  for (double L : {2.0, 5.0, 1e5, 1e8, 1e12}) samples.push_back({L, 0.3});
  const auto rep = criterion_density(samples, 2.0, 1.0, 1e5);
  EXPECT_TRUE(rep.verdict);
  EXPECT_FALSE(rep.checks[1].holds);
}

TEST(DensityCriterion, LogLogDecayingDensityFails) {
  const double L = std::exp(10.0);  // rho = exp(-e^10)
  const double sigma = std::pow(std::log(L), -2.0);
  for (double lambda : {0.1, 1.0, 10.0}) {
    const auto rep = criterion_density({{L, sigma}}, 2.0, lambda, 1.0);
    ASSERT_EQ(rep.checks.size(), 1u);
    EXPECT_FALSE(rep.checks[0].holds);
    EXPECT_FALSE(rep.verdict);
  }
}

TEST(DensityCriterion, LargeRadiusIsSkipped) {
  const auto rep = criterion_density({{std::log(2.0), 1.0}}, 2.0, 1.0, 0.0);
  ASSERT_EQ(rep.checks.size(), 1u);
  EXPECT_TRUE(rep.checks[0].skipped);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_FALSE(rep.verdict);
}

TEST(DensityCriterion, FullDensityHoldsOnceRhsDropsBelowOne) {
  for (double lambda : {0.5, 1.0, 3.0}) {
    const double L = std::exp(lambda) * 1.01;
    const auto rep = criterion_density({{L, 1.0}, {L * 10, 1.0}}, 3.0, lambda, L * 0.5);
    EXPECT_TRUE(rep.verdict) << lambda;
  }
}

}  // namespace
}  // namespace potlab
