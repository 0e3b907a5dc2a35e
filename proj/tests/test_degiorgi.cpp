#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

#include "potlab/degiorgi.hpp"
#include "potlab/solver.hpp"

namespace potlab {
namespace {

GridPtr disk(double h) { return build_grid({2, Shape(Ball{{0, 0, 0}, 1.0})}, h); }

Field random_field(const GridPtr& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Field u(g);
  for (double& v : u.values) v = U(rng);
  return u;
}

// Radial t = 3 capacitary potential of ball(1/4) in ball(1); shared by several tests.
const Field& radial_potential(double h) {
  static std::map<double, Field> cache;
  auto it = cache.find(h);
  if (it != cache.end()) return it->second;
  const auto g = disk(h);
  std::vector<std::size_t> e;
  for (std::size_t i : g->interior_nodes()) {
    if (norm(g->position(i)) <= 0.25) e.push_back(i);
  }
  auto s = solve_obstacle(g, {e, 1.0, +1}, OperatorSpec::p_laplace(3.0));
  EXPECT_TRUE(s.report.converged);
  return cache.emplace(h, std::move(s.u)).first->second;
}

TEST(Constants, ClosedFormValues) {
  const auto c22 = degiorgi_constants(2.0, 2);
  EXPECT_NEAR(c22.theta, (1.0 + std::sqrt(5.0)) / 2.0, 1e-12);
  EXPECT_FALSE(c22.theta1.has_value());
  const auto c28 = degiorgi_constants(2.0, 8);
  EXPECT_NEAR(c28.theta, 0.5 + std::sqrt(0.5), 1e-12);
  ASSERT_TRUE(c28.theta1.has_value());
}

TEST(Constants, DefiningRelationsOverTheGrid) {
  for (double t : {1.5, 2.0, 3.0, 4.0}) {
    for (int n : {2, 3, 8}) {
      const auto c = degiorgi_constants(t, n);
      EXPECT_GT(c.theta, 1.0);
      EXPECT_LE(std::abs(c.theta * c.theta - c.theta - t / n), 1e-12);
      EXPECT_GT(c.beta, 0.0);
      EXPECT_NEAR(c.beta, (t + n * c.theta) / (c.theta - 1.0), 1e-12 * c.beta);
      EXPECT_EQ(c.theta1.has_value(), t < n);
      if (c.theta1) EXPECT_LE(std::abs(*c.theta1 * *c.theta1 - *c.theta1 - t / (n - t)), 1e-12);
    }
  }
}

TEST(LevelStats, ConstantField) {
  const auto g = disk(1.0 / 16);
  const Field u(g, 0.3);
  const Vec y{0.25, 0, 0};
  const double rho = 0.4;
  std::size_t count = 0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    if (g->label(i) != NodeLabel::exterior && norm(g->position(i) - y) <= rho) ++count;
  }
  const double vol = count * g->h() * g->h();
  const auto s = level_stats(u, y, 0.8, rho, 2.5);
  EXPECT_DOUBLE_EQ(s.b, vol);
  EXPECT_NEAR(s.u_int, std::pow(0.5, 2.5) * vol, 1e-14);
  const auto none = level_stats(u, y, 0.3 - 1e-9, rho, 2.5);
  EXPECT_EQ(none.b, 0.0);
  EXPECT_EQ(none.u_int, 0.0);
  EXPECT_EQ(none.psi, 0.0);
}

TEST(LevelStats, MatchesBruteForceScan) {
  const auto g = disk(1.0 / 16);
  const double t = 3.0;
  const double theta = degiorgi_constants(t, 2).theta;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Field u = random_field(g, seed);
    const Vec y{0.125 * static_cast<double>(seed % 3), -0.25, 0};
    const double k = 0.6;
    const double rho = 0.5;
    double b = 0.0;
    double ui = 0.0;
    std::size_t nodes = 0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (g->label(i) == NodeLabel::exterior || norm(g->position(i) - y) > rho || u[i] > k) continue;
      ++nodes;
      b += g->h() * g->h();
      ui += std::pow(k - u[i], t) * g->h() * g->h();
    }
    const auto s = level_stats(u, y, k, rho, t);
    EXPECT_EQ(s.nodes, nodes);
    EXPECT_NEAR(s.b, b, 1e-12 * b);
    EXPECT_NEAR(s.u_int, ui, 1e-12 * ui);
    EXPECT_NEAR(s.psi, std::pow(ui, theta * 2.0 / t) * b, 1e-12 * s.psi);
  }
}

TEST(LevelStats, MonotoneInLevelAndRadiusOverHundredSeeds) {
  const auto g = disk(1.0 / 8);
  const Vec y{0, 0, 0};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Field u = random_field(g, 1000 + seed);
    LevelSetStats prev_k{};
    for (double k : {0.1, 0.3, 0.5, 0.7, 0.9, 1.1}) {
      const auto s = level_stats(u, y, k, 0.6, 2.0);
      EXPECT_GE(s.b, prev_k.b);
      EXPECT_GE(s.u_int, prev_k.u_int);
      EXPECT_GE(s.psi, prev_k.psi);
      prev_k = s;
    }
    LevelSetStats prev_r{};
    for (double rho : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      const auto s = level_stats(u, y, 0.6, rho, 2.0);
      EXPECT_GE(s.b, prev_r.b);
      EXPECT_GE(s.u_int, prev_r.u_int);
      EXPECT_GE(s.psi, prev_r.psi);
      prev_r = s;
    }
  }
}

TEST(Caccioppoli, FlatFieldGivesZero) {
  const auto g = disk(1.0 / 16);
  const auto r = check_caccioppoli(Field(g, 0.5), OperatorSpec::p_laplace(2.0), {0, 0, 0}, 0.5, 0.2, 0.4);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.c_emp, 0.0);
  EXPECT_FALSE(r.violation);
}

TEST(Caccioppoli, ObstacleSolutionAboveTheLevel) {
  const Field& u = radial_potential(1.0 / 64);
  for (auto [k, rho, R] : {std::tuple{1.0, 0.125, 0.25}, std::tuple{1.2, 0.1, 0.3}, std::tuple{0.8, 0.125, 0.25}}) {
    const auto r = check_caccioppoli(u, OperatorSpec::p_laplace(3.0), {0.25, 0, 0}, k, rho, R);
    EXPECT_FALSE(r.violation);
    EXPECT_TRUE(std::isfinite(r.c_emp));
    EXPECT_GT(r.c_emp, 0.0);
    EXPECT_GT(r.rhs, 0.0);
  }
}

TEST(Schedule, SequencesDecreaseToTheirLimits) {
  IterationSchedule s{{0, 0, 0}, 0.4, 1.0, 0.2, 30};
  EXPECT_DOUBLE_EQ(s.radius(0), 0.4);
  EXPECT_DOUBLE_EQ(s.level(0), 1.0);
  for (int m = 0; m < s.steps; ++m) {
    EXPECT_LT(s.radius(m + 1), s.radius(m));
    EXPECT_LT(s.level(m + 1), s.level(m));
    EXPECT_GT(s.radius(m + 1), 0.2);
    EXPECT_GT(s.level(m + 1), 0.8);
  }
  EXPECT_NEAR(s.radius(s.steps), 0.2, 1e-9);
  EXPECT_NEAR(s.level(s.steps), 0.8, 1e-9);
}

TEST(PsiRecursion, ZeroStartIsTrivial) {
  const Field& u = radial_potential(1.0 / 64);
  // Below the minimum of u no node is in the sublevel set.
  const auto rep = check_psi_recursion(u, 3.0, IterationSchedule{{0.25, 0, 0}, 0.25, -0.5, 0.1, 12});
  for (const auto& l : rep.levels) EXPECT_EQ(l.psi, 0.0);
  EXPECT_TRUE(rep.decay_ok);
  EXPECT_TRUE(rep.truncated);
  EXPECT_TRUE(rep.monotone);
}

TEST(PsiRecursion, RadialPotentialNonincreasingAndClosing) {
  const Field& u = radial_potential(1.0 / 64);
  const IterationSchedule sched{{0.25, 0, 0}, 0.25, 1.0, 0.05, 24};
  const auto rep = check_psi_recursion(u, 3.0, sched);
  EXPECT_TRUE(rep.monotone);
  for (std::size_t m = 1; m < rep.levels.size(); ++m) EXPECT_LE(rep.levels[m].psi, rep.levels[m - 1].psi);
  const auto th = psi_threshold_search(u, 3.0, sched);
  EXPECT_TRUE(th.closed);
  EXPECT_GE(th.d, sched.d);
  EXPECT_EQ(th.report.b_final, 0.0);
}

TEST(PsiRecursion, ThresholdFormula) {
  const double t = 2.0;
  const int n = 2;
  const auto c = degiorgi_constants(t, n);
  const double d = psi_threshold_d(3.0, t, n, 0.5, 0.01);
  const double expected = std::pow(3.0 * std::pow(2.0, c.beta * c.theta), 1.0 / t) * std::pow(0.25, -n * c.theta / t) *
                          std::pow(0.01, (c.theta - 1.0) / t);
  EXPECT_NEAR(d, expected, 1e-12 * expected);
}

TEST(Oscillation, ConstantFieldAndNesting) {
  const auto g = disk(1.0 / 32);
  for (const auto& s : oscillation_sequence(Field(g, 2.0), {0, 0, 0}, 0.5, 3)) EXPECT_EQ(s.omega, 0.0);
  const Field u = random_field(g, 77);
  const auto seq = oscillation_sequence(u, {0, 0, 0}, 0.5, 3);
  ASSERT_EQ(seq.size(), 4u);
  for (std::size_t k = 1; k < seq.size(); ++k) {
    EXPECT_DOUBLE_EQ(seq[k].r, seq[k - 1].r / 4.0);
    EXPECT_LE(seq[k].omega, seq[k - 1].omega);
  }
}

TEST(Oscillation, RadialProfileMatchesClosedForm) {
  // The error is first order in h; 2% at r = 1/16 needs h = 1/512.
  const Field& u = radial_potential(1.0 / 512);
  const auto seq = oscillation_sequence(u, {0.25, 0, 0}, 0.25, 1);
  auto exact = [](double r) { return 2.0 * (1.0 - std::sqrt(r)); };
  ASSERT_EQ(seq.size(), 2u);
  for (const auto& s : seq) {
    const double expected = 1.0 - exact(0.25 + s.r);
    EXPECT_NEAR(s.omega, expected, 0.02 * expected) << "r=" << s.r;
  }
}

TEST(Envelope, FullDensityArithmetic) {
  const std::vector<double> sigma(4, 1.0);
  const std::vector<double> omega{1.0, 0.9, 0.8, 0.7};
  const auto rep = n0_and_decay(sigma, 2.0, 0.125, omega);
  ASSERT_EQ(rep.steps.size(), 4u);
  double env = 1.0;
  for (std::size_t k = 1; k < rep.steps.size(); ++k) {
    EXPECT_EQ(rep.steps[k].n0, 1.0);
    EXPECT_EQ(rep.steps[k].eta, 0.25);
    EXPECT_EQ(rep.steps[k].factor, 15.0 / 16.0);
    env *= 15.0 / 16.0;
    EXPECT_DOUBLE_EQ(rep.steps[k].envelope, env);
  }
  EXPECT_TRUE(rep.n0_bounds_ok);
}

TEST(Envelope, ZeroDensityPredictsNoDecay) {
  const auto rep = n0_and_decay({0.5, 0.0, 0.0}, 2.0, 0.125, {1.0, 1.0, 1.0});
  EXPECT_TRUE(std::isinf(rep.steps[1].n0));
  EXPECT_EQ(rep.steps[1].factor, 1.0);
  EXPECT_EQ(rep.steps[2].envelope, 1.0);
  EXPECT_TRUE(rep.passed);
}

TEST(Envelope, VanishingDensityFactorsTendToOne) {
  std::vector<double> sigma{1.0};
  std::vector<double> omega{1.0};
  for (int k = 1; k <= 5; ++k) {
    sigma.push_back(std::pow(10.0, -k));
    omega.push_back(1.0);
  }
  const auto rep = n0_and_decay(sigma, 2.0, 0.125, omega);
  for (std::size_t k = 2; k < rep.steps.size(); ++k) EXPECT_GE(rep.steps[k].factor, rep.steps[k - 1].factor);
  EXPECT_GT(rep.steps.back().envelope, 0.9);
}

TEST(Envelope, NZeroSatisfiesTwoSidedBound) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> sigma{1.0, U(rng), U(rng), U(rng)};
    const double t = 1.5 + 2.0 * U(rng);
    DecayOptions opt;
    opt.C1 = 0.5 + U(rng);
    const auto rep = n0_and_decay(sigma, t, 0.125, {1.0, 1.0, 1.0, 1.0}, opt);
    EXPECT_TRUE(rep.n0_bounds_ok);
    for (std::size_t k = 1; k < rep.steps.size(); ++k) {
      const double lower = opt.C1 * std::pow(sigma[k], -t / (t - 1.0));
      EXPECT_GE(rep.steps[k].n0, lower);
      EXPECT_LT(rep.steps[k].n0, 1.0 + lower);
      EXPECT_EQ(rep.steps[k].eta, std::ldexp(1.0, -static_cast<int>(rep.steps[k].n0) - 1));
    }
  }
}

TEST(Divergence, PartialProductsDecreaseAndMatchHarmonicSums) {
  // With r0 = 1/8 the factors are 1 - 1/(16 log 4 (k + 1)).
  double prev = 0.0;
  for (long K : {10L, 1000L, 100000L}) {
    const double lp = divergence_log_product(0.125, K);
    EXPECT_LT(lp, prev);
    prev = lp;
    double direct = 0.0;
    for (long k = 1; k <= K; ++k) direct += std::log1p(-1.0 / (16.0 * std::log(4.0) * (k + 1)));
    EXPECT_NEAR(lp, direct, 1e-9 * std::abs(direct));
  }
}

}  // namespace
}  // namespace potlab
