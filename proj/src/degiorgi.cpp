#include "potlab/degiorgi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace potlab {

DeGiorgiConstants degiorgi_constants(double t, int n) {
  if (!(t > 1.0)) throw std::invalid_argument("t must exceed 1");
  if (n < 2) throw std::invalid_argument("dimension must be at least 2");
  DeGiorgiConstants c;
  const double nn = n;
  c.theta = 0.5 + std::sqrt(0.25 + t / nn);
  c.beta = (t + nn * c.theta) / (c.theta - 1.0);
  if (t < nn) c.theta1 = 0.5 + std::sqrt(0.25 + t / (nn - t));
  return c;
}

LevelSetStats level_stats(const Field& u, const Vec& y, double k, double rho, double t) {
  if (!(rho > 0.0)) throw std::invalid_argument("level_stats radius must be positive");
  const GridDomain& g = *u.grid;
  LevelSetStats s;
  s.k = k;
  s.rho = rho;
  const double cell = std::pow(g.h(), g.dim());
  double acc = 0.0;
  for (std::size_t i : g.nodes_in_ball(y, rho)) {
    if (g.label(i) == NodeLabel::exterior || u[i] > k) continue;
    ++s.nodes;
    acc += std::pow(k - u[i], t);
  }
  s.b = cell * static_cast<double>(s.nodes);
  s.u_int = cell * acc;
  const double theta = degiorgi_constants(t, g.dim()).theta;
  s.psi = s.u_int > 0.0 ? std::pow(s.u_int, theta * g.dim() / t) * s.b : 0.0;
  return s;
}

CaccioppoliResult check_caccioppoli(const Field& u, const OperatorSpec& spec, const Vec& y, double k, double rho,
                                    double R, double tol) {
  if (!(rho > 0.0 && rho < R)) throw std::invalid_argument("Caccioppoli radii must satisfy 0 < rho < R");
  const GridDomain& g = *u.grid;
  const int n = g.dim();
  const double h = g.h();
  const CellStencil st(n, h, spec.scheme);
  const double wvol = st.weight() * std::pow(h, n);
  auto phi = [&](const Vec& x) {
    const double r = norm(x - y);
    if (r <= rho) return 1.0;
    if (r >= R) return 0.0;
    return (R - r) / (R - rho);
  };
  auto in_set = [&](std::size_t i) {
    return g.label(i) != NodeLabel::exterior && u[i] <= k && norm(g.position(i) - y) <= R;
  };

  CaccioppoliResult res;
  res.k = k;
  res.rho = rho;
  res.R = R;
  double lhs = 0.0;
  for (std::size_t c : g.active_cells()) {
    Vec centre = g.position(c);
    for (int d = 0; d < n; ++d) centre[d] += 0.5 * h;
    if (norm(centre - y) >= R + h) continue;
    const double ph = std::pow(phi(centre), spec.t);
    if (ph == 0.0) continue;
    double mean = 0.0;
    for (int b = 0; b < g.corners(); ++b) mean += u[c + g.corner_offset(b)];
    mean /= g.corners();
    for (int s = 0; s < st.count(); ++s) {
      // A corner gradient belongs to its corner node; the single averaged gradient to the cell.
      const bool counted = spec.scheme == GradientScheme::corner
                               ? in_set(c + g.corner_offset(s))
                               : mean <= k && norm(centre - y) <= R;
      if (!counted) continue;
      const Vec gr = cell_gradient(g, st, c, s, u.values);
      lhs += wvol * std::pow(dot(gr, gr), 0.5 * spec.t) * ph;
    }
  }
  res.lhs = lhs;
  res.rhs = level_stats(u, y, k, R, spec.t).u_int;
  if (res.rhs > 0.0) {
    res.c_emp = res.lhs / (std::pow(R - rho, -spec.t) * res.rhs);
  } else {
    res.c_emp = 0.0;
    res.violation = res.lhs > tol;
  }
  return res;
}

double IterationSchedule::radius(int m) const { return 0.5 * r0 + r0 / std::ldexp(1.0, m + 1); }

double IterationSchedule::level(int m) const { return k0 - d + d / std::ldexp(1.0, m); }

PsiRecursionReport check_psi_recursion(const Field& u, double t, const IterationSchedule& sc, double slack) {
  if (!(sc.r0 > 0.0) || !(sc.d > 0.0)) throw std::invalid_argument("schedule needs r0 > 0 and d > 0");
  if (sc.steps < 1) throw std::invalid_argument("schedule needs at least one step");
  const int n = u.grid->dim();
  const DeGiorgiConstants c = degiorgi_constants(t, n);
  PsiRecursionReport rep;
  rep.theta = c.theta;
  rep.beta = c.beta;
  for (int m = 0; m <= sc.steps; ++m) rep.levels.push_back(level_stats(u, sc.y, sc.level(m), sc.radius(m), t));

  const double psi0 = rep.levels.front().psi;
  rep.decay_ok = true;
  for (int m = 0; m <= sc.steps; ++m) {
    const double p = rep.levels[m].psi;
    if (p > 0.0) ++rep.usable;
    if (m > 0 && p > rep.levels[m - 1].psi) rep.monotone = false;
    if (psi0 > 0.0) {
      rep.max_decay_ratio = std::max(rep.max_decay_ratio, p / (psi0 * std::exp2(-c.beta * m)));
    }
    if (m < sc.steps && p > 0.0) {
      const double dr = sc.radius(m) - sc.radius(m + 1);
      const double dk = sc.level(m) - sc.level(m + 1);
      const double bound = std::pow(dr, -n * c.theta) * std::pow(dk, -t) * std::pow(p, c.theta);
      rep.c_hat = std::max(rep.c_hat, rep.levels[m + 1].psi / bound);
    }
  }
  rep.decay_ok = rep.max_decay_ratio <= slack;
  rep.truncated = rep.usable < 3;
  rep.b_final = level_stats(u, sc.y, sc.k0 - sc.d, 0.5 * sc.r0, t).b;
  return rep;
}

double psi_threshold_d(double c_hat, double t, int n, double r0, double psi0) {
  const DeGiorgiConstants c = degiorgi_constants(t, n);
  return std::pow(c_hat * std::exp2(c.beta * c.theta), 1.0 / t) * std::pow(0.5 * r0, -n * c.theta / t) *
         std::pow(psi0, (c.theta - 1.0) / t);
}

PsiThreshold psi_threshold_search(const Field& u, double t, IterationSchedule sc, int max_iterations) {
  PsiThreshold out;
  for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
    out.report = check_psi_recursion(u, t, sc);
    out.d = sc.d;
    const double psi0 = out.report.levels.front().psi;
    if (psi0 == 0.0) {
      out.closed = true;
      break;
    }
    const double next = psi_threshold_d(out.report.c_hat, t, u.grid->dim(), sc.r0, psi0);
    if (next <= sc.d * (1.0 + 1e-12)) {
      out.closed = true;
      break;
    }
    sc.d = next;
  }
  out.iterations = std::min(out.iterations, max_iterations);
  return out;
}

std::vector<OscillationSample> oscillation_sequence(const Field& u, const Vec& y, double r0, int K) {
  if (!(r0 > 0.0) || K < 0) throw std::invalid_argument("oscillation_sequence needs r0 > 0 and K >= 0");
  const GridDomain& g = *u.grid;
  std::vector<OscillationSample> out;
  for (int k = 0; k <= K; ++k) {
    OscillationSample s;
    s.r = r0 * std::pow(0.25, k);
    s.inf = std::numeric_limits<double>::infinity();
    s.sup = -s.inf;
    for (std::size_t i : g.nodes_in_ball(y, s.r)) {
      if (g.label(i) == NodeLabel::exterior) continue;
      s.inf = std::min(s.inf, u[i]);
      s.sup = std::max(s.sup, u[i]);
      s.used = true;
    }
    s.omega = s.used ? s.sup - s.inf : std::numeric_limits<double>::quiet_NaN();
    out.push_back(s);
  }
  return out;
}

DecayReport n0_and_decay(const std::vector<double>& sigma_2r, double t, double r0, const std::vector<double>& omega,
                         const DecayOptions& opt) {
  if (sigma_2r.size() != omega.size() || omega.empty()) {
    throw std::invalid_argument("sigma and omega sequences must have the same nonzero length");
  }
  if (!(t > 1.0)) throw std::invalid_argument("t must exceed 1");
  if (!(opt.C1 > 0.0)) throw std::invalid_argument("C1 must be positive");
  DecayReport rep;
  rep.passed = true;
  rep.n0_bounds_ok = true;
  double envelope = omega.front();
  for (std::size_t k = 0; k < omega.size(); ++k) {
    DecayStep s;
    s.k = static_cast<int>(k);
    s.r = r0 * std::pow(0.25, static_cast<double>(k));
    s.sigma = sigma_2r[k];
    s.omega = omega[k];
    if (s.sigma < 0.0 || s.sigma > 1.0) throw std::invalid_argument("sigma values must lie in [0, 1]");
    if (s.sigma > 0.0) {
      const double lower = opt.C1 * std::pow(s.sigma, -t / (t - 1.0));
      s.n0 = std::ceil(lower);
      s.eta = std::exp2(-(s.n0 + 1.0));
      if (!(lower <= s.n0 && s.n0 < 1.0 + lower)) rep.n0_bounds_ok = false;
    } else {
      s.n0 = std::numeric_limits<double>::infinity();
      s.eta = 0.0;
    }
    const double two_r = 2.0 * s.r;
    s.density_margin = two_r < std::exp(-1.0)
                           ? std::pow(s.sigma, t / (t - 1.0)) - opt.C1 * std::log(2.0) / std::log(std::log(1.0 / two_r))
                           : std::numeric_limits<double>::quiet_NaN();
    if (k > 0) {
      if (opt.lower_order) {
        s.factor = 0.5;
        envelope = 0.5 * envelope + (s.eta > 0.0 ? opt.lower_order_c + 1.0 / s.eta : std::numeric_limits<double>::infinity()) * s.r;
      } else {
        s.factor = 1.0 - 0.25 * s.eta;
        envelope *= s.factor;
      }
    }
    s.envelope = envelope;
    s.below = std::isnan(s.omega) || s.omega <= opt.slack * s.envelope;
    if (!s.below) rep.passed = false;
    rep.steps.push_back(s);
  }
  return rep;
}

double divergence_log_product(double r0, long K) {
  if (!(r0 > 0.0 && r0 < 0.5)) throw std::invalid_argument("r0 must lie in (0, 1/2)");
  const double l4 = std::log(4.0);
  const double l2r = std::log(2.0 * r0);
  double sum = 0.0;
  double comp = 0.0;
  for (long k = 1; k <= K; ++k) {
    const double eta = 1.0 / (4.0 * (static_cast<double>(k) * l4 - l2r));
    const double term = std::log1p(-0.25 * eta);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace potlab
