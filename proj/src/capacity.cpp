#include "potlab/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace potlab {

std::string placement_name(SigmaPlacement p) { return p == SigmaPlacement::enclosing ? "enclosing" : "cap_centered"; }

SigmaPlacement placement_from_name(const std::string& name) {
  if (name == "enclosing") return SigmaPlacement::enclosing;
  if (name == "cap_centered") return SigmaPlacement::cap_centered;
  throw std::invalid_argument("unknown sigma placement '" + name + "'");
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::regular_trend:
      return "regular-trend";
    case Verdict::irregular_trend:
      return "irregular-trend";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

std::size_t node_at(const GridDomain& grid, const Vec& y) {
  IVec l{0, 0, 0};
  for (int k = 0; k < grid.dim(); ++k) l[k] = std::lround(y[k] / grid.h());
  const auto idx = grid.index_of(l);
  if (!idx || norm(grid.position(*idx) - y) > 1e-9 * grid.h()) {
    std::ostringstream msg;
    msg << "point is not a lattice node at h = " << grid.h();
    throw std::invalid_argument(msg.str());
  }
  return *idx;
}

ShapeSpec sigma_shape(const GridDomain& omega, const ComplementCap& cap, SigmaPlacement placement) {
  if (placement == SigmaPlacement::cap_centered) return {omega.dim(), Shape(Ball{cap.center, 2.0 * cap.radius})};
  return {omega.dim(), Shape(Ball{enclosing_center(omega), 2.0 * enclosing_radius(omega)})};
}

PotentialCheck check_potential(const Field& u, const std::vector<std::size_t>& e_nodes, const SolveReport& report,
                               int sign, double m, const SolveOptions& options) {
  PotentialCheck c;
  const GridDomain& g = *u.grid;
  c.min_u = std::numeric_limits<double>::infinity();
  c.max_u = -c.min_u;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.label(i) == NodeLabel::exterior) continue;
    c.min_u = std::min(c.min_u, u[i]);
    c.max_u = std::max(c.max_u, u[i]);
  }
  const double lo = sign > 0 ? c.min_u : -c.max_u;
  const double hi = sign > 0 ? c.max_u : -c.min_u;
  c.bounds_ok = lo >= -options.tol_u && hi <= m + options.tol_u;
  c.equals_m_on_E = std::all_of(e_nodes.begin(), e_nodes.end(), [&](std::size_t i) { return u[i] == sign * m; });
  c.residual_ok = report.max_residual <= options.tol_r && report.min_obstacle_residual >= -options.tol_r;
  return c;
}

CapacitaryPotential capacitary_potential(const GridPtr& sigma, const ComplementCap& cap, const OperatorSpec& spec,
                                         int sign, double m, const SolveOptions& options) {
  if (cap.nodes.empty()) throw std::invalid_argument("capacitary potential of an empty cap");
  if (std::abs(sigma->h() - cap.h) > 1e-12 * cap.h) throw std::invalid_argument("cap and Sigma use different spacings");
  CapacitaryPotential out;
  ObstacleConstraint c;
  c.m = m;
  c.sign = sign;
  for (const IVec& l : cap.nodes) {
    const auto idx = sigma->index_of(l);
    if (!idx || !sigma->is_interior(*idx)) throw std::invalid_argument("cap reaches the boundary of Sigma");
    c.nodes.push_back(*idx);
  }
  Solution s = solve_obstacle(sigma, c, spec, options);
  out.u = std::move(s.u);
  out.report = std::move(s.report);
  out.e_nodes = std::move(c.nodes);
  out.check = check_potential(out.u, out.e_nodes, out.report, sign, m, options);
  return out;
}

CapacitaryPotential capacitary_potential(const GridDomain& omega, const ComplementCap& cap, const OperatorSpec& spec,
                                         int sign, double m, SigmaPlacement placement, const SolveOptions& options) {
  const ShapeSpec sig = sigma_shape(omega, cap, placement);
  const auto* ball = std::get_if<Ball>(sig.shape.primitive());
  auto grid = build_grid(sig, cap.h);
  CapacitaryPotential out = capacitary_potential(grid, cap, spec, sign, m, options);
  out.sigma_center = ball->center;
  out.sigma_radius = ball->radius;
  return out;
}

std::vector<double> WienerProbeConfig::radii() const {
  std::vector<double> r;
  for (int k = 0; k <= K; ++k) r.push_back(r0 * std::pow(0.25, k));
  return r;
}

void WienerProbeConfig::validate() const {
  if (!(m > 0.0)) throw std::invalid_argument("m: must be positive");
  if (!(rho0 > 0.0)) throw std::invalid_argument("rho0: must be positive");
  if (!(r0 > 0.0) || r0 > 0.5 * rho0) throw std::invalid_argument("r0: must satisfy 0 < r0 <= rho0 / 2");
  if (K < 3) throw std::invalid_argument("K: must be at least 3");
  if (h_levels.empty()) throw std::invalid_argument("h_levels: must not be empty");
  for (std::size_t i = 0; i < h_levels.size(); ++i) {
    if (!(h_levels[i] > 0.0)) throw std::invalid_argument("h_levels: spacings must be positive");
    if (i > 0 && !(h_levels[i] < h_levels[i - 1])) throw std::invalid_argument("h_levels: must be strictly decreasing");
  }
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("decay: must lie in (0, 1)");
  if (!(stagnation > 0.0 && stagnation < 1.0)) throw std::invalid_argument("stagnation: must lie in (0, 1)");
  if (!(min_radius_cells > 0.0)) throw std::invalid_argument("min_radius_cells: must be positive");
}

namespace {

struct BallStats {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
};

BallStats stats_in_ball(const Field& u, const std::vector<char>& mask, const Vec& y, double r) {
  BallStats s;
  for (std::size_t i : u.grid->nodes_in_ball(y, r)) {
    if (!mask[i]) continue;
    s.min = std::min(s.min, u[i]);
    s.max = std::max(s.max, u[i]);
    ++s.count;
  }
  return s;
}

RegularityReport probe_one(const ShapeSpec& omega, const OperatorSpec& spec, const WienerProbeConfig& cfg) {
  RegularityReport rep;
  rep.config = cfg;
  rep.radii = cfg.radii();
  const int n = omega.dim;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const double h_coarse = cfg.h_levels.front();
  rep.stagnation_radius = rep.radii.front();
  for (double r : rep.radii) {
    if (r >= 4.0 * h_coarse) rep.stagnation_radius = r;
  }

  Field previous;
  for (double h : cfg.h_levels) {
    ProbeLevel lvl;
    lvl.h = h;
    auto og = build_grid(omega, h);
    const std::size_t yi = node_at(*og, cfg.y);
    if (og->label(yi) != NodeLabel::boundary) throw std::invalid_argument("y: not a boundary node of the domain");
    const ComplementCap cap = complement_cap(*og, yi, cfg.rho0);
    lvl.cap_nodes = cap.count();
    lvl.cap_density = density(cap);

    const ShapeSpec sig = sigma_shape(*og, cap, cfg.placement);
    auto sg = build_grid(sig, h);
    lvl.sigma_nodes = sg->interior_nodes().size();
    SolveOptions opt = cfg.solve;
    if (cfg.coarse_to_fine && previous.grid && std::abs(previous.grid->h() - 2.0 * h) <= 1e-12 * h) {
      opt.initial = prolongate(previous, *sg, 0.0);
    }
    CapacitaryPotential pot = capacitary_potential(sg, cap, spec, +1, cfg.m, opt);
    lvl.report = pot.report;
    lvl.check = pot.check;
    if (!pot.report.converged) rep.diagnostics.push_back("solve did not converge at h = " + std::to_string(h));
    if (!pot.check.passed()) rep.diagnostics.push_back("potential check failed at h = " + std::to_string(h));
    rep.potentials_ok = rep.potentials_ok && pot.report.converged && pot.check.passed();

    std::vector<char> mask(sg->size(), 0);
    for (std::size_t i : sg->interior_nodes()) {
      mask[i] = omega.shape.classify(sg->position(i), h) == Membership::inside ? 1 : 0;
    }
    for (double r : rep.radii) {
      const bool usable = r >= cfg.min_radius_cells * h * (1.0 - 1e-12);
      const BallStats s = usable ? stats_in_ball(pot.u, mask, cfg.y, r) : BallStats{};
      lvl.used.push_back(usable && s.count > 0);
      lvl.omega.push_back(lvl.used.back() ? s.max - s.min : nan);
      lvl.deficit.push_back(lvl.used.back() ? cfg.m - s.min : nan);
    }
    const BallStats near = stats_in_ball(pot.u, mask, cfg.y, std::sqrt(static_cast<double>(n)) * h);
    lvl.deficit_near_y = near.count ? cfg.m - near.min : nan;
    const BallStats fixed = stats_in_ball(pot.u, mask, cfg.y, rep.stagnation_radius);
    lvl.deficit_fixed = fixed.count ? cfg.m - fixed.min : nan;
    lvl.u = pot.u;
    previous = pot.u;

    if (h == cfg.h_levels.back()) {
      const double big_r = enclosing_radius(*og);
      for (double r : rep.radii) {
        if (2.0 * r < 0.5 * big_r) {
          const ComplementCap c2 = complement_cap(*og, yi, 2.0 * r);
          rep.density_2r.push_back(density(c2));
          rep.sigma_hat_2r.push_back(sigma_hat_lower_bound(c2, 0.0));
        } else {
          rep.density_2r.push_back(nan);
          rep.sigma_hat_2r.push_back(nan);
        }
      }
    }
    rep.levels.push_back(std::move(lvl));
  }

  const ProbeLevel& fine = rep.levels.back();
  int k_eff = -1;
  for (int k = 0; k < static_cast<int>(fine.used.size()); ++k) {
    if (fine.used[k]) k_eff = k;
  }
  if (k_eff < cfg.K) {
    std::ostringstream msg;
    msg << "finest level resolves radii up to k = " << k_eff << " of K = " << cfg.K;
    rep.diagnostics.push_back(msg.str());
  }
  if (k_eff >= 1 && fine.used[0] && fine.omega[0] > 0.0) {
    rep.decay_ratio = fine.omega[k_eff] / fine.omega[0];
    rep.decay_ok = rep.decay_ratio <= cfg.decay;
  } else if (k_eff >= 1 && fine.used[0]) {
    rep.decay_ratio = 0.0;
    rep.decay_ok = true;
  }
  rep.near_deficit_shrinks = rep.levels.size() >= 2;
  rep.stagnates = true;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    const double d = rep.levels[i].deficit_near_y;
    if (i > 0 && !(d < rep.levels[i - 1].deficit_near_y)) rep.near_deficit_shrinks = false;
    const double floor = cfg.stagnation * cfg.m;
    if (!(d >= floor && rep.levels[i].deficit_fixed >= floor)) rep.stagnates = false;
  }

  std::ostringstream why;
  if (!rep.potentials_ok) {
    rep.verdict = Verdict::inconclusive;
    why << "a capacitary potential failed its solve or checks";
  } else if (rep.decay_ok && rep.near_deficit_shrinks) {
    rep.verdict = Verdict::regular_trend;
    why << "omega(r_" << k_eff << ")/omega(r_0) = " << rep.decay_ratio << " <= " << cfg.decay
        << " and the deficit next to y shrinks with h";
  } else if (rep.stagnates) {
    rep.verdict = Verdict::irregular_trend;
    why << "deficit next to y and at r = " << rep.stagnation_radius << " stays >= " << cfg.stagnation
        << " m on every level";
  } else {
    rep.verdict = Verdict::inconclusive;
    why << "decay ratio " << rep.decay_ratio << (rep.near_deficit_shrinks ? "" : ", near-y deficit not shrinking")
        << ", no stagnation";
  }
  rep.reason = why.str();
  return rep;
}

}  // namespace

RegularityReport wiener_probe(const ShapeSpec& omega, const OperatorSpec& spec, const WienerProbeConfig& config) {
  config.validate();
  RegularityReport rep = probe_one(omega, spec, config);
  if (spec.odd_symmetric) return rep;
  // u_{-m} for A is minus u_{+m} for the reflected field; both must behave.
  RegularityReport mirrored = probe_one(omega, reflect(spec), config);
  if (mirrored.verdict != rep.verdict) {
    rep.diagnostics.push_back("sign - potential gives " + verdict_name(mirrored.verdict) + ": " + mirrored.reason);
    if (rep.verdict == Verdict::regular_trend || mirrored.verdict == Verdict::inconclusive) {
      rep.verdict = mirrored.verdict;
      rep.reason = "sign - potential: " + mirrored.reason;
    }
  }
  return rep;
}

Barrier barrier_build(const GridPtr& omega, const OperatorSpec& spec, const Vec& y, double rho, double m,
                      const std::vector<double>& deltas, double decay, const SolveOptions& options) {
  if (omega->label(node_at(*omega, y)) != NodeLabel::boundary) throw std::invalid_argument("barrier point must be a boundary node");
  if (!(rho > 0.0) || !(m > 0.0)) throw std::invalid_argument("barrier rho and m must be positive");
  const BoundaryData up{[y, rho, m](const Vec& x) {
                          const Vec d = x - y;
                          return m * dot(d, d) / (rho * rho);
                        },
                        "m|x-y|^2/rho^2"};
  const BoundaryData down{[up](const Vec& x) { return -up(x); }, "-m|x-y|^2/rho^2"};
  Barrier b;
  Solution v = solve_dirichlet(omega, spec, up, options);
  Solution u = solve_dirichlet(omega, spec, down, options);
  b.V = std::move(v.u);
  b.U = std::move(u.u);
  BarrierReport& r = b.report;
  r.v_report = v.report;
  r.u_report = u.report;

  r.condition_j = true;
  for (std::size_t i : omega->boundary_nodes()) {
    if (norm(omega->position(i) - y) >= rho && b.V[i] < m - options.tol_u) r.condition_j = false;
  }
  r.nonnegative = true;
  for (std::size_t i = 0; i < omega->size(); ++i) {
    if (omega->label(i) != NodeLabel::exterior && b.V[i] < -options.tol_u) r.nonnegative = false;
  }

  r.deltas = deltas;
  std::sort(r.deltas.begin(), r.deltas.end(), std::greater<>());
  bool monotone = true;
  for (double d : r.deltas) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i : omega->nodes_in_ball(y, d)) {
      if (omega->is_interior(i)) mx = std::max(mx, b.V[i]);
    }
    if (!r.max_v.empty() && mx > r.max_v.back() + options.tol_u) monotone = false;
    r.max_v.push_back(mx);
  }
  if (r.max_v.size() >= 2 && std::isfinite(r.max_v.back()) && r.max_v.front() > 0.0) {
    r.ratio = r.max_v.back() / r.max_v.front();
    r.condition_jj = monotone && r.ratio <= decay;
  }
  return b;
}

LocalityReport locality_check(const ShapeSpec& omega, const ShapeSpec& lambda, double r, const OperatorSpec& spec,
                              const WienerProbeConfig& config) {
  config.validate();
  if (omega.dim != lambda.dim) throw std::invalid_argument("locality: shapes have different dimensions");
  const double h = config.h_levels.back();
  const long reach = static_cast<long>(std::ceil(r / h));
  const long zr = omega.dim == 3 ? reach : 0;
  for (long dz = -zr; dz <= zr; ++dz) {
    for (long dy = -reach; dy <= reach; ++dy) {
      for (long dx = -reach; dx <= reach; ++dx) {
        const Vec p = config.y + Vec{dx * h, dy * h, dz * h};
        if (norm(p - config.y) > r) continue;
        const bool a = omega.shape.classify(p, h) == Membership::inside;
        const bool b = lambda.shape.classify(p, h) == Membership::inside;
        if (a != b) throw std::invalid_argument("locality: shapes differ inside I(y, r)");
      }
    }
  }
  LocalityReport rep;
  rep.shapes_agree = true;
  rep.first = wiener_probe(omega, spec, config);
  rep.second = wiener_probe(lambda, spec, config);
  rep.passed = rep.first.verdict == rep.second.verdict;
  return rep;
}

}  // namespace potlab
