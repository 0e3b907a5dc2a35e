#include "potlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace potlab {

double ComplementCap::volume() const { return static_cast<double>(nodes.size()) * std::pow(h, dim); }

bool ComplementCap::contains(const IVec& l) const { return std::binary_search(nodes.begin(), nodes.end(), l); }

Vec enclosing_center(const GridDomain& domain) {
  const auto b = domain.shape().shape.bounds(domain.dim());
  return 0.5 * (b->lo + b->hi);
}

double enclosing_radius(const GridDomain& domain) {
  const Vec c = enclosing_center(domain);
  double r = 0.0;
  for (std::size_t i : domain.interior_nodes()) r = std::max(r, norm(domain.position(i) - c));
  for (std::size_t i : domain.boundary_nodes()) r = std::max(r, norm(domain.position(i) - c));
  return r;
}

ComplementCap complement_cap(const GridDomain& domain, std::size_t y, double rho) {
  if (y >= domain.size() || domain.label(y) != NodeLabel::boundary) {
    throw std::invalid_argument("cap centre must be a boundary node");
  }
  if (!(rho > 0.0)) throw std::invalid_argument("cap radius must be positive");
  const double big_r = enclosing_radius(domain);
  if (rho >= 0.5 * big_r) {
    std::ostringstream msg;
    msg << "cap radius " << rho << " exceeds grid bounds (must be below R/2 = " << 0.5 * big_r << ")";
    throw std::invalid_argument(msg.str());
  }

  ComplementCap cap;
  cap.dim = domain.dim();
  cap.h = domain.h();
  cap.center = domain.position(y);
  cap.center_lattice = domain.lattice(y);
  cap.radius = rho;
  cap.domain_shape = domain.shape().shape;

  const double h = domain.h();
  const long reach = static_cast<long>(std::ceil(rho / h));
  const double r2 = rho * rho * (1.0 + 1e-12);
  const IVec c = cap.center_lattice;
  const long zr = cap.dim == 3 ? reach : 0;
  IVec l{0, 0, 0};
  for (long dz = -zr; dz <= zr; ++dz) {
    for (long dy = -reach; dy <= reach; ++dy) {
      for (long dx = -reach; dx <= reach; ++dx) {
        const double d2 = h * h * static_cast<double>(dx * dx + dy * dy + dz * dz);
        if (d2 > r2) continue;
        l = {c[0] + dx, c[1] + dy, c[2] + dz};
        const Vec p{l[0] * h, l[1] * h, l[2] * h};
        if (cap.domain_shape.classify(p, h) != Membership::inside) cap.nodes.push_back(l);
      }
    }
  }
  std::sort(cap.nodes.begin(), cap.nodes.end());
  return cap;
}

double density(const ComplementCap& cap) {
  if (cap.radius <= 0.0) return 0.0;
  const double s = cap.volume() / (unit_ball_volume(cap.dim) * std::pow(cap.radius, cap.dim));
  return std::clamp(s, 0.0, 1.0);
}

bool line_meets_cap(const ComplementCap& cap, const Vec& x, const Vec& xi) {
  const Vec d0 = x - cap.center;
  const double a = dot(xi, xi);
  const double b = dot(d0, xi);
  const double c = dot(d0, d0) - cap.radius * cap.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  const double s0 = (-b - sq) / a;
  const double s1 = (-b + sq) / a;

  std::vector<double> cand{s0, s1};
  std::vector<double> raw;
  cap.domain_shape.crossings(x, xi, raw);
  for (double s : raw) {
    if (s > s0 && s < s1) cand.push_back(s);
  }
  if (cap.domain_shape.needs_line_sampling()) {
    constexpr int kSamples = 64;
    for (int j = 1; j < kSamples; ++j) cand.push_back(s0 + (s1 - s0) * j / kSamples);
  }
  std::sort(cand.begin(), cand.end());

  const double lim = cap.radius * cap.radius * (1.0 + 1e-12);
  auto hit = [&](double s) {
    const Vec p = x + s * xi;
    const Vec d = p - cap.center;
    return dot(d, d) <= lim && cap.domain_shape.classify(p, 0.0) != Membership::inside;
  };
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (hit(cand[i])) return true;
    if (i + 1 < cand.size() && hit(0.5 * (cand[i] + cand[i + 1]))) return true;
  }
  return false;
}

SolidAngleEstimate solid_angle_lower_bound(const ComplementCap& cap, const SolidAngleOptions& options) {
  if (options.directions < kMinDirections || options.probes < kMinProbes) {
    throw std::invalid_argument("solid-angle sample counts below the configured minimum");
  }
  SolidAngleEstimate est;
  est.directions = options.directions;
  est.probes = options.probes;
  est.seed = options.seed;
  if (cap.nodes.empty()) return est;

  const int n = cap.dim;
  const double full = unit_sphere_area(n);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto draw_probe = [&]() -> std::optional<Vec> {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      Vec u{};
      for (int k = 0; k < n; ++k) u[k] = uni(rng);
      if (dot(u, u) > 1.0) continue;
      const Vec x = cap.center + cap.radius * u;
      if (cap.domain_shape.classify(x, 0.0) == Membership::inside) return x;
    }
    return std::nullopt;
  };

  double best = std::numeric_limits<double>::infinity();
  for (int p = 0; p < options.probes; ++p) {
    const auto x = draw_probe();
    if (!x) break;
    int hits = 0;
    for (int d = 0; d < options.directions; ++d) {
      Vec xi{};
      do {
        for (int k = 0; k < n; ++k) xi[k] = gauss(rng);
      } while (dot(xi, xi) == 0.0);
      if (line_meets_cap(cap, *x, normalized(xi))) ++hits;
    }
    const double frac = static_cast<double>(hits) / options.directions;
    const double value = full * frac;
    if (value < best) {
      best = value;
      est.value = value;
      est.standard_error = full * std::sqrt(frac * (1.0 - frac) / options.directions);
      est.worst_probe = *x;
    }
  }
  if (!std::isfinite(best)) {
    // Every sampled point lies in E: the ball is (numerically) filled.
    est.value = full;
  }
  return est;
}

double sigma_hat_lower_bound(int dim, double sigma, double angle) {
  const double volumetric = sigma * unit_sphere_area(dim) / std::pow(2.0, dim);
  return std::max(volumetric, angle);
}

double sigma_hat_lower_bound(const ComplementCap& cap, double angle) {
  if (cap.nodes.empty()) return 0.0;
  return sigma_hat_lower_bound(cap.dim, density(cap), angle);
}

DensityCriterionReport criterion_density(const std::vector<DensitySample>& samples, double t, double lambda,
                                         double log_inv_rho_star) {
  if (!(t > 1.0)) throw std::invalid_argument("criterion_density requires t > 1");
  DensityCriterionReport rep;
  bool any = false;
  bool all = true;
  for (const auto& s : samples) {
    DensityCheck c;
    c.log_inv_rho = s.log_inv_rho;
    if (!(s.log_inv_rho > 1.0)) {
      c.skipped = true;
      std::ostringstream msg;
      msg << "radius exp(-" << s.log_inv_rho << ") is not below 1/e; skipped";
      rep.warnings.push_back(msg.str());
      rep.checks.push_back(c);
      continue;
    }
    c.lhs = std::pow(std::clamp(s.sigma, 0.0, 1.0), t / (t - 1.0));
    c.rhs = lambda / std::log(s.log_inv_rho);
    c.holds = c.lhs >= c.rhs;
    if (s.log_inv_rho > log_inv_rho_star) {
      any = true;
      all = all && c.holds;
    }
    rep.checks.push_back(c);
  }
  if (!any) rep.warnings.emplace_back("no sampled radius below rho*");
  rep.verdict = any && all;
  return rep;
}

}  // namespace potlab
