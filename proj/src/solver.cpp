#include "potlab/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace potlab {

BoundaryData BoundaryData::constant(double c) {
  return {[c](const Vec&) { return c; }, "constant"};
}

namespace {

/// Compensated summation; energies are sums of ~10^6 terms compared at 1e-14.
class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

enum class NodeRole : std::uint8_t { fixed, free, obstacle };

/// Cyclic coordinate minimization of the discrete energy.
class Minimizer {
 public:
  Minimizer(const GridDomain& grid, const OperatorSpec& spec, std::vector<double>& u, std::vector<NodeRole> roles,
            double bound, int sign, const SolveOptions& options)
      : grid_(grid),
        spec_(spec),
        u_(u),
        roles_(std::move(roles)),
        bound_(bound),
        sign_(sign),
        opt_(options),
        n_(grid.dim()),
        corners_(grid.corners()),
        st_(grid.dim(), grid.h(), spec.scheme),
        vol_(std::pow(grid.h(), grid.dim())),
        wvol_(st_.weight() * vol_),
        radial_(spec.is_radial()),
        quadratic_(spec.is_radial() && spec.t == 2.0) {
    for (std::size_t i : grid_.interior_nodes()) order_.push_back(i);
    if (opt_.order == SweepOrder::red_black) {
      std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        return parity(a) < parity(b);
      });
    }
    // Offsets of the 3^N - 1 lattice neighbours.
    const int zr = n_ == 3 ? 1 : 0;
    for (int dz = -zr; dz <= zr; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          nbr_.push_back(dx * grid_.stride(0) + dy * grid_.stride(1) + dz * grid_.stride(2));
        }
      }
    }
  }

  SolveReport run() {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    SolveReport rep;
    rep.relaxation = opt_.relaxation > 0.0 ? opt_.relaxation : auto_relaxation();
    omega_ = rep.relaxation;

    double prev_energy = total_energy();
    rep.energy_history.push_back(prev_energy);
    std::vector<double> updates;
    for (long sweep = 1; sweep <= opt_.max_sweeps; ++sweep) {
      const double delta = run_sweep();
      updates.push_back(delta);
      rep.iterations = sweep;
      rep.max_update = delta;
      const double e = total_energy();
      rep.energy_history.push_back(e);
      if (e > prev_energy + 1e-14 * std::max(1.0, std::abs(prev_energy))) rep.energy_monotone = false;
      prev_energy = e;

      constexpr long kWindow = 10;
      double rho = 1.0;
      if (updates.size() > kWindow) {
        const double past = updates[updates.size() - 1 - kWindow];
        rho = past > 0.0 ? std::pow(delta / past, 1.0 / kWindow) : 0.0;
      }
      rep.contraction = rho;
      if (delta > opt_.tol_u) continue;
      const bool settled = delta <= 1e-3 * opt_.tol_u || (rho < 1.0 && delta * rho / (1.0 - rho) <= opt_.tol_u);
      if (!settled) continue;
      residual_check(rep);
      if (rep.max_residual <= opt_.tol_r && rep.min_obstacle_residual >= -opt_.tol_r) {
        rep.converged = true;
        break;
      }
    }
    if (!rep.converged) {
      residual_check(rep);
      rep.note = "iteration cap reached";
    }
    rep.energy = prev_energy;
    rep.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    return rep;
  }

  double total_energy() const {
    NeumaierSum e;
    for (std::size_t c : grid_.active_cells()) {
      for (int s = 0; s < st_.count(); ++s) {
        const Vec g = cell_gradient(grid_, st_, c, s, u_);
        e.add(radial_ ? w_of_q(dot(g, g)) : potential(spec_, g));
      }
    }
    return e.value() * wvol_;
  }

  void residual_check(SolveReport& rep) const {
    std::vector<double> r(grid_.size(), 0.0);
    for (std::size_t c : grid_.active_cells()) {
      for (int s = 0; s < st_.count(); ++s) {
        const Vec a = apply_A(spec_, cell_gradient(grid_, st_, c, s, u_));
        for (int b = 0; b < corners_; ++b) {
          if (st_.touches(s, b)) r[c + grid_.corner_offset(b)] += wvol_ * dot(a, st_.coeff(s, b));
        }
      }
    }
    rep.max_residual = 0.0;
    rep.min_obstacle_residual = 0.0;
    for (std::size_t i : order_) {
      if (roles_[i] == NodeRole::obstacle && u_[i] == bound_) {
        rep.min_obstacle_residual = std::min(rep.min_obstacle_residual, sign_ * r[i]);
      } else {
        rep.max_residual = std::max(rep.max_residual, std::abs(r[i]));
      }
    }
  }

 private:
  int parity(std::size_t i) const {
    const IVec l = grid_.lattice(i);
    return static_cast<int>(((l[0] + l[1] + l[2]) % 2 + 2) % 2);
  }

  double auto_relaxation() const {
    Vec lo{}, hi{};
    bool first = true;
    for (std::size_t i : order_) {
      const Vec p = grid_.position(i);
      for (int k = 0; k < n_; ++k) {
        lo[k] = first ? p[k] : std::min(lo[k], p[k]);
        hi[k] = first ? p[k] : std::max(hi[k], p[k]);
      }
      first = false;
    }
    double d = 0.0;
    for (int k = 0; k < n_; ++k) d = std::max(d, hi[k] - lo[k]);
    d += 2.0 * grid_.h();
    return 2.0 / (1.0 + std::numbers::pi * grid_.h() / d);
  }

  double w_of_q(double q) const {
    const double t = spec_.t;
    if (t == 2.0) return 0.5 * q;
    const double c = spec_.kind == OperatorKind::regularized ? 1.0 : spec_.eps * spec_.eps;
    const double base = c + q;
    if (t == 3.0) return base * std::sqrt(base) / 3.0;
    if (t == 4.0) return 0.25 * base * base;
    return std::pow(base, 0.5 * t) / t;
  }

  // Local energy pieces of node i: sub-gradients G_e + s d_e of the cells around it.
  static constexpr int kMaxEntries = 32;
  struct Local {
    int count = 0;
    std::array<Vec, kMaxEntries> G{};
    std::array<Vec, kMaxEntries> d{};
    std::array<double, kMaxEntries> gd{};
    std::array<double, kMaxEntries> gg{};
    std::array<double, kMaxEntries> dd{};
  };

  void gather(std::size_t i, Local& loc) const {
    const double ui = u_[i];
    loc.count = 0;
    for (int b = 0; b < corners_; ++b) {
      const std::size_t cell = i - grid_.corner_offset(b);
      for (int s = 0; s < st_.count(); ++s) {
        if (!st_.touches(s, b)) continue;
        const Vec& d = st_.coeff(s, b);
        const Vec g = cell_gradient(grid_, st_, cell, s, u_) - ui * d;
        const int e = loc.count++;
        loc.G[e] = g;
        loc.d[e] = d;
        loc.gd[e] = dot(g, d);
        loc.gg[e] = dot(g, g);
        loc.dd[e] = dot(d, d);
      }
    }
  }

  // f'(s), optionally f''(s).
  double fprime(const Local& loc, double s, double* fpp) const {
    double fp = 0.0;
    double f2 = 0.0;
    if (radial_) {
      for (int e = 0; e < loc.count; ++e) {
        const double gd = loc.gd[e] + s * loc.dd[e];
        const double q = loc.gg[e] + s * (2.0 * loc.gd[e] + s * loc.dd[e]);
        const double phi = radial_phi(spec_, q);
        fp += phi * gd;
        if (fpp) f2 += phi * loc.dd[e] + 2.0 * radial_dphi(spec_, q) * gd * gd;
      }
    } else {
      for (int e = 0; e < loc.count; ++e) fp += dot(apply_A(spec_, loc.G[e] + s * loc.d[e]), loc.d[e]);
    }
    if (fpp) *fpp = f2 * wvol_;
    return fp * wvol_;
  }

  double flocal(const Local& loc, double s) const {
    double f = 0.0;
    for (int e = 0; e < loc.count; ++e) {
      if (radial_) {
        f += w_of_q(loc.gg[e] + s * (2.0 * loc.gd[e] + s * loc.dd[e]));
      } else {
        f += potential(spec_, loc.G[e] + s * loc.d[e]);
      }
    }
    return f * wvol_;
  }

  double line_minimize(const Local& loc, double s0, double span) const {
    if (quadratic_) {
      double sum_gd = 0.0;
      double sum_dd = 0.0;
      for (int e = 0; e < loc.count; ++e) {
        sum_gd += loc.gd[e];
        sum_dd += loc.dd[e];
      }
      return -sum_gd / sum_dd;
    }
    double fpp = 0.0;
    double fp = fprime(loc, s0, radial_ ? &fpp : nullptr);
    if (fp == 0.0) return s0;
    double lo = s0;
    double hi = s0;
    double step = std::max(span, 1e-8 * std::max(1.0, std::abs(s0)));
    if (fp > 0.0) {
      for (int it = 0; it < 200; ++it) {
        lo = s0 - step;
        if (fprime(loc, lo, nullptr) <= 0.0) break;
        hi = lo;
        step *= 2.0;
      }
    } else {
      for (int it = 0; it < 200; ++it) {
        hi = s0 + step;
        if (fprime(loc, hi, nullptr) >= 0.0) break;
        lo = hi;
        step *= 2.0;
      }
    }
    double s = s0;
    for (int it = 0; it < 200; ++it) {
      double x = 0.5 * (lo + hi);
      if (radial_ && fpp > 0.0) {
        const double nx = s - fp / fpp;
        if (nx > lo && nx < hi) x = nx;
      }
      fp = fprime(loc, x, radial_ ? &fpp : nullptr);
      if (fp > 0.0) {
        hi = x;
      } else if (fp < 0.0) {
        lo = x;
      } else {
        return x;
      }
      const double tol = 1e-14 * std::max(1.0, std::abs(x));
      if (std::abs(x - s) <= tol || hi - lo <= tol) return x;
      s = x;
    }
    return s;
  }

  double run_sweep() {
    double delta = 0.0;
    Local loc;
    for (std::size_t i : order_) {
      const double s_old = u_[i];
      double nmin = std::numeric_limits<double>::infinity();
      double nmax = -nmin;
      for (std::ptrdiff_t off : nbr_) {
        const double v = u_[i + off];
        nmin = std::min(nmin, v);
        nmax = std::max(nmax, v);
      }
      gather(i, loc);
      double s_star = line_minimize(loc, s_old, std::max(nmax - nmin, std::abs(s_old - nmin)));
      const bool obstacle = roles_[i] == NodeRole::obstacle;
      s_star = project(s_star, obstacle);

      double s_new = s_star;
      if (omega_ != 1.0 && s_star != s_old) {
        const double s_rel = s_old + omega_ * (s_star - s_old);
        double c = project(std::clamp(s_rel, nmin, nmax), obstacle);
        const bool between = (c - s_old) * (s_rel - s_old) >= 0.0 && std::abs(c - s_old) <= std::abs(s_rel - s_old);
        if (between && std::abs(c - s_old) > std::abs(s_star - s_old)) {
          if (quadratic_ || flocal(loc, c) <= flocal(loc, s_old)) s_new = c;
        }
      }
      u_[i] = s_new;
      delta = std::max(delta, std::abs(s_new - s_old));
    }
    return delta;
  }

  double project(double s, bool obstacle) const {
    if (!obstacle) return s;
    return sign_ > 0 ? std::max(s, bound_) : std::min(s, bound_);
  }

  const GridDomain& grid_;
  const OperatorSpec& spec_;
  std::vector<double>& u_;
  std::vector<NodeRole> roles_;
  double bound_;
  int sign_;
  SolveOptions opt_;
  int n_;
  int corners_;
  CellStencil st_;
  double vol_;
  double wvol_;
  bool radial_;
  bool quadratic_;
  double omega_ = 1.0;
  std::vector<std::size_t> order_;
  std::vector<std::ptrdiff_t> nbr_;
};

/// Solves the t = 2 problem with every non-free node held at its current value.
void linear_solve(const GridDomain& grid, GradientScheme scheme, std::vector<double>& u,
                  const std::vector<NodeRole>& roles) {
  const int n = grid.dim();
  const int nc = grid.corners();
  const CellStencil st(n, grid.h(), scheme);
  std::vector<long> unknown(grid.size(), -1);
  long count = 0;
  for (std::size_t i : grid.interior_nodes()) {
    if (roles[i] == NodeRole::free) unknown[i] = count++;
  }
  if (count == 0) return;

  double local[8][8];
  for (int a = 0; a < nc; ++a) {
    for (int b = 0; b < nc; ++b) {
      double s = 0.0;
      for (int q = 0; q < st.count(); ++q) s += dot(st.coeff(q, a), st.coeff(q, b));
      local[a][b] = s * grid.h() * grid.h();
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(count) * (n == 2 ? 16 : 64));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(count);
  for (std::size_t c : grid.active_cells()) {
    for (int a = 0; a < nc; ++a) {
      const long ra = unknown[c + grid.corner_offset(a)];
      if (ra < 0) continue;
      for (int b = 0; b < nc; ++b) {
        if (local[a][b] == 0.0) continue;
        const std::size_t j = c + grid.corner_offset(b);
        if (unknown[j] >= 0) {
          trip.emplace_back(ra, unknown[j], local[a][b]);
        } else {
          rhs[ra] -= local[a][b] * u[j];
        }
      }
    }
  }
  Eigen::SparseMatrix<double> k(count, count);
  k.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  trip.shrink_to_fit();
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-13);
  cg.setMaxIterations(20 * count + 1000);
  cg.compute(k);
  Eigen::VectorXd x0(count);
  for (std::size_t i : grid.interior_nodes()) {
    if (unknown[i] >= 0) x0[unknown[i]] = u[i];
  }
  const Eigen::VectorXd x = cg.solveWithGuess(rhs, x0);
  for (std::size_t i : grid.interior_nodes()) {
    if (unknown[i] >= 0) u[i] = x[unknown[i]];
  }
}

double energy_of(const GridDomain& grid, const OperatorSpec& spec, const CellStencil& st, const std::vector<double>& u) {
  NeumaierSum e;
  for (std::size_t c : grid.active_cells()) {
    for (int s = 0; s < st.count(); ++s) e.add(potential(spec, cell_gradient(grid, st, c, s, u)));
  }
  return e.value() * st.weight() * std::pow(grid.h(), grid.dim());
}

/// Damped Newton iteration on the free nodes with CG inner solves. Only a warm start:
/// the coordinate sweeps decide convergence.
void newton_solve(const GridDomain& grid, const OperatorSpec& spec, std::vector<double>& u,
                  const std::vector<NodeRole>& roles, double tol) {
  const int n = grid.dim();
  const int nc = grid.corners();
  const CellStencil st(n, grid.h(), spec.scheme);
  const double wvol = st.weight() * std::pow(grid.h(), n);
  std::vector<long> unknown(grid.size(), -1);
  long count = 0;
  for (std::size_t i : grid.interior_nodes()) {
    if (roles[i] == NodeRole::free) unknown[i] = count++;
  }
  if (count == 0) return;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd grad(count);
  double energy = energy_of(grid, spec, st, u);
  for (int iter = 0; iter < 60; ++iter) {
    trip.clear();
    grad.setZero();
    for (std::size_t c : grid.active_cells()) {
      for (int s = 0; s < st.count(); ++s) {
        const Vec g = cell_gradient(grid, st, c, s, u);
        const double q = dot(g, g);
        const double phi = radial_phi(spec, q);
        const double dphi = radial_dphi(spec, q);
        for (int a = 0; a < nc; ++a) {
          if (!st.touches(s, a)) continue;
          const long ra = unknown[c + grid.corner_offset(a)];
          if (ra < 0) continue;
          const Vec& da = st.coeff(s, a);
          grad[ra] += wvol * phi * dot(g, da);
          const double gda = dot(g, da);
          for (int b = 0; b < nc; ++b) {
            if (!st.touches(s, b)) continue;
            const long rb = unknown[c + grid.corner_offset(b)];
            if (rb < 0) continue;
            const Vec& db = st.coeff(s, b);
            const double hab = wvol * (phi * dot(da, db) + 2.0 * dphi * gda * dot(g, db));
            if (hab != 0.0) trip.emplace_back(ra, rb, hab);
          }
        }
      }
    }
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= 0.1 * tol) break;
    Eigen::SparseMatrix<double> hess(count, count);
    hess.setFromTriplets(trip.begin(), trip.end());
    // Degenerate exponents leave flat regions with a singular Hessian.
    double diag_mean = 0.0;
    for (long i = 0; i < count; ++i) diag_mean += hess.coeff(i, i);
    diag_mean /= static_cast<double>(count);
    const double shift = 1e-10 * diag_mean;
    for (long i = 0; i < count; ++i) hess.coeffRef(i, i) += shift;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(std::min(1e-2, std::max(1e-10, std::sqrt(gnorm))));
    cg.setMaxIterations(4 * count + 100);
    cg.compute(hess);
    const Eigen::VectorXd step = cg.solve(-grad);

    std::vector<double> trial = u;
    double lambda = 1.0;
    bool accepted = false;
    const double slope = grad.dot(step);
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i : grid.interior_nodes()) {
        if (unknown[i] >= 0) trial[i] = u[i] + lambda * step[unknown[i]];
      }
      const double e = energy_of(grid, spec, st, trial);
      if (e <= energy + 1e-4 * lambda * slope) {
        energy = e;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
    u.swap(trial);
    if (lambda * step.lpNorm<Eigen::Infinity>() <= 0.01 * tol) break;
  }
}

void require_potential(const OperatorSpec& spec) {
  if (!spec.has_potential()) {
    throw std::invalid_argument("solver requires a potential operator; energy undefined; use weak_residual");
  }
}

}  // namespace

Solution solve_dirichlet(const GridPtr& grid, const OperatorSpec& spec, const BoundaryData& phi,
                         const SolveOptions& options) {
  require_potential(spec);
  if (!(options.tol_u > 0.0) || !(options.tol_r > 0.0)) throw std::invalid_argument("tolerances must be positive");
  Solution sol{Field(grid, 0.0), {}};
  std::vector<double>& u = sol.u.values;
  std::vector<NodeRole> roles(grid->size(), NodeRole::fixed);
  double mean = 0.0;
  for (std::size_t i : grid->boundary_nodes()) {
    u[i] = phi(grid->position(i));
    if (!std::isfinite(u[i])) throw std::invalid_argument("boundary data is not finite at a boundary node");
    mean += u[i];
  }
  mean /= static_cast<double>(std::max<std::size_t>(1, grid->boundary_nodes().size()));
  for (std::size_t i : grid->interior_nodes()) {
    roles[i] = NodeRole::free;
    u[i] = mean;
  }
  if (options.initial) {
    for (std::size_t i : grid->interior_nodes()) u[i] = (*options.initial)[i];
  }
  if (options.linear_warm_start && (!options.initial || spec.t == 2.0)) linear_solve(*grid, spec.scheme, u, roles);
  if (options.newton_warm_start && spec.is_radial() && spec.t != 2.0) newton_solve(*grid, spec, u, roles, options.tol_r);
  Minimizer mz(*grid, spec, u, std::move(roles), 0.0, +1, options);
  sol.report = mz.run();
  return sol;
}

Solution solve_obstacle(const GridPtr& grid, const ObstacleConstraint& constraint, const OperatorSpec& spec,
                        const SolveOptions& options) {
  require_potential(spec);
  if (!(constraint.m > 0.0)) throw std::invalid_argument("obstacle level m must be positive");
  if (constraint.sign != 1 && constraint.sign != -1) throw std::invalid_argument("obstacle sign must be +1 or -1");
  Solution sol{Field(grid, 0.0), {}};
  if (constraint.nodes.empty()) {
    sol.report.converged = true;
    sol.report.note = "empty obstacle set; zero solution";
    return sol;
  }
  std::vector<double>& u = sol.u.values;
  std::vector<NodeRole> roles(grid->size(), NodeRole::fixed);
  for (std::size_t i : grid->interior_nodes()) roles[i] = NodeRole::free;
  const double bound = constraint.sign * constraint.m;
  for (std::size_t i : constraint.nodes) {
    if (i >= grid->size() || !grid->is_interior(i)) {
      throw std::invalid_argument("obstacle node outside the interior of the solve region");
    }
    roles[i] = NodeRole::obstacle;
    u[i] = bound;
  }
  if (options.initial) {
    for (std::size_t i : grid->interior_nodes()) u[i] = (*options.initial)[i];
    for (std::size_t i : constraint.nodes) u[i] = constraint.sign > 0 ? std::max(u[i], bound) : std::min(u[i], bound);
  }
  if (options.linear_warm_start && (!options.initial || spec.t == 2.0)) linear_solve(*grid, spec.scheme, u, roles);
  if (options.newton_warm_start && spec.is_radial() && spec.t != 2.0) {
    // E is held at the obstacle level here; the projected sweeps release it where needed.
    std::vector<NodeRole> held = roles;
    for (std::size_t i : constraint.nodes) {
      held[i] = NodeRole::fixed;
      u[i] = bound;
    }
    newton_solve(*grid, spec, u, held, options.tol_r);
  }
  Minimizer mz(*grid, spec, u, std::move(roles), bound, constraint.sign, options);
  sol.report = mz.run();
  return sol;
}

std::vector<double> prolongate(const Field& coarse, const GridDomain& fine, double fallback) {
  const GridDomain& cg = *coarse.grid;
  if (std::abs(cg.h() - 2.0 * fine.h()) > 1e-12 * cg.h()) throw std::invalid_argument("prolongation needs h_coarse = 2 h_fine");
  const int n = fine.dim();
  std::vector<double> out(fine.size(), fallback);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const IVec l = fine.lattice(i);
    // Coarse lattice coordinate l/2; odd components straddle two coarse nodes.
    double acc = 0.0;
    int used = 0;
    bool ok = true;
    const int combos = 1 << n;
    for (int c = 0; c < combos && ok; ++c) {
      IVec cl{0, 0, 0};
      bool dup = false;
      for (int k = 0; k < n; ++k) {
        const long half = l[k] >= 0 ? l[k] / 2 : -((-l[k] + 1) / 2);
        const bool odd = (l[k] - 2 * half) != 0;
        if (!odd && (c & (1 << k))) dup = true;
        cl[k] = half + ((c & (1 << k)) ? 1 : 0);
      }
      if (dup) continue;
      const auto j = cg.index_of(cl);
      if (!j || cg.label(*j) == NodeLabel::exterior) {
        ok = false;
        break;
      }
      acc += coarse[*j];
      ++used;
    }
    if (ok && used > 0) out[i] = acc / used;
  }
  return out;
}

double mollify(const BoundaryData& phi, const Vec& x, double width, int dim, Mollifier family) {
  // Tensor Gauss-Legendre rule (8 points per axis) on [-1, 1]^N with kernel weights.
  static constexpr std::array<double, 8> kNodes{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                                0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> kWeights{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                                  0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                                  0.2223810344533745, 0.1012285362903763};
  if (width <= 0.0) return phi(x);
  double acc = 0.0;
  double wsum = 0.0;
  const int kz = dim == 3 ? 8 : 1;
  for (int c = 0; c < kz; ++c) {
    for (int b = 0; b < 8; ++b) {
      for (int a = 0; a < 8; ++a) {
        Vec z{kNodes[a], kNodes[b], dim == 3 ? kNodes[c] : 0.0};
        double w = kWeights[a] * kWeights[b] * (dim == 3 ? kWeights[c] : 1.0);
        if (family == Mollifier::bump) {
          const double r2 = dot(z, z);
          if (r2 >= 1.0) continue;
          w *= (1.0 - r2) * (1.0 - r2);
        }
        acc += w * phi(x + width * z);
        wsum += w;
      }
    }
  }
  return acc / wsum;
}

GeneralizedSolution generalized_solution(const GridPtr& grid, const OperatorSpec& spec, const BoundaryData& phi,
                                         int n, const SolveOptions& options, Mollifier family) {
  if (n < 1) throw std::invalid_argument("sequence length must be at least 1");
  const auto b = grid->shape().shape.bounds(grid->dim());
  const double diam = norm(b->hi - b->lo);
  GeneralizedSolution out;
  std::vector<double> prev_data;
  Field prev;
  SolveOptions opt = options;
  for (int k = 1; k <= n; ++k) {
    const double width = std::ldexp(diam, -k);
    BoundaryData data{[&phi, width, d = grid->dim(), family](const Vec& x) { return mollify(phi, x, width, d, family); },
                      "mollified"};
    Solution s = solve_dirichlet(grid, spec, data, opt);
    if (!s.report.converged) throw std::runtime_error("inner solve did not converge at k = " + std::to_string(k));
    GeneralizedStep step;
    step.k = k;
    step.width = width;
    step.report = s.report;
    if (k > 1) {
      for (std::size_t i : grid->boundary_nodes()) step.data_change = std::max(step.data_change, std::abs(s.u[i] - prev[i]));
      for (std::size_t i : grid->interior_nodes()) step.sup_change = std::max(step.sup_change, std::abs(s.u[i] - prev[i]));
      step.contraction_ok = step.sup_change <= step.data_change + 2.0 * options.tol_u;
      out.contraction_ok = out.contraction_ok && step.contraction_ok;
    }
    opt.initial = s.u.values;
    prev = s.u;
    out.steps.push_back(std::move(step));
  }
  out.u = prev;
  return out;
}

ComparisonReport verify_comparison(const Field& u, const Field& v, double tol) {
  if (u.grid != v.grid) throw std::invalid_argument("fields live on different grids");
  const GridDomain& g = *u.grid;
  ComparisonReport rep;
  double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
  bool ordered_data = true;
  for (std::size_t i : g.boundary_nodes()) {
    umin = std::min(umin, u[i]);
    umax = std::max(umax, u[i]);
    vmin = std::min(vmin, v[i]);
    vmax = std::max(vmax, v[i]);
    ordered_data = ordered_data && u[i] <= v[i];
    rep.sup_data_difference = std::max(rep.sup_data_difference, std::abs(u[i] - v[i]));
  }
  rep.data_ordered = ordered_data;
  for (std::size_t i : g.interior_nodes()) {
    const double ex = std::max({umin - u[i], u[i] - umax, vmin - v[i], v[i] - vmax, 0.0});
    rep.max_principle_excess = std::max(rep.max_principle_excess, ex);
    if (ordered_data) rep.order_excess = std::max(rep.order_excess, u[i] - v[i]);
    rep.sup_difference = std::max(rep.sup_difference, std::abs(u[i] - v[i]));
  }
  rep.max_principle = rep.max_principle_excess <= tol;
  rep.ordered = !ordered_data || rep.order_excess <= 2.0 * tol;
  rep.contraction = rep.sup_difference <= rep.sup_data_difference + 2.0 * tol;
  return rep;
}

}  // namespace potlab
