#include "potlab/scenario.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace potlab {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- field access

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(where(key) + ": " + what);
  }

  [[nodiscard]] std::string where(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  [[nodiscard]] const json& at(const std::string& key) const {
    if (!has(key)) fail(key, "missing");
    return j_.at(key);
  }

  [[nodiscard]] double num(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
  }

  [[nodiscard]] double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

  [[nodiscard]] std::optional<double> opt_num(const std::string& key) const {
    return has(key) ? std::optional<double>(num(key)) : std::nullopt;
  }

  [[nodiscard]] double positive(const std::string& key) const {
    const double d = num(key);
    if (!(d > 0.0)) fail(key, "must be positive");
    return d;
  }

  [[nodiscard]] long integer(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<long>();
  }

  [[nodiscard]] long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  [[nodiscard]] bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) fail(key, "expected true or false");
    return j_.at(key).get<bool>();
  }

  [[nodiscard]] std::string str(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  [[nodiscard]] Vec vec(const std::string& key, int dim) const {
    const json& v = at(key);
    if (!v.is_array() || static_cast<int>(v.size()) != dim) {
      fail(key, "expected an array of " + std::to_string(dim) + " numbers");
    }
    Vec out{};
    for (int k = 0; k < dim; ++k) {
      if (!v[k].is_number()) fail(key, "expected an array of " + std::to_string(dim) + " numbers");
      out[k] = v[k].get<double>();
    }
    return out;
  }

  [[nodiscard]] std::vector<double> nums(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (const json& x : v) {
      if (!x.is_number()) fail(key, "expected a nonempty array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  [[nodiscard]] Reader sub(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_object()) fail(key, "expected an object");
    return {v, where(key)};
  }

  [[nodiscard]] std::optional<Reader> opt_sub(const std::string& key) const {
    return has(key) ? std::optional<Reader>(sub(key)) : std::nullopt;
  }

  void only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) fail(k, "unknown field");
    }
  }

  [[nodiscard]] const json& raw() const { return j_; }

 private:
  const json& j_;
  std::string path_;
};

Shape read_shape(const Reader& r, const std::string& key, int dim) {
  try {
    return shape_from_json(r.at(key), dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.where(key) + ": " + e.what());
  }
}

Expression read_expression(const Reader& r, const std::string& key, int dim) {
  try {
    return Expression::parse(r.str(key), dim);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.where(key) + ": " + e.what());
  }
}

std::vector<double> read_h_levels(const Reader& r, const std::string& key) {
  std::vector<double> h = r.nums(key);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0)) r.fail(key, "spacings must be positive");
    if (i > 0 && !(h[i] < h[i - 1])) r.fail(key, "must be strictly decreasing");
  }
  return h;
}

OperatorSpec read_operator(const Reader& r) {
  r.only({"kind", "t", "eps", "scheme"});
  const std::string kind = r.str("kind", "p_laplace");
  const double t = r.num("t");
  if (!(t > 1.0)) r.fail("t", "must exceed 1");
  OperatorSpec op;
  if (kind == "p_laplace") {
    const double eps = r.num("eps", 0.0);
    if (eps < 0.0) r.fail("eps", "must be nonnegative");
    op = OperatorSpec::p_laplace(t, eps);
  } else if (kind == "regularized") {
    if (r.has("eps")) r.fail("eps", "only applies to p_laplace");
    op = OperatorSpec::regularized(t);
  } else if (kind == "custom") {
    r.fail("kind", "custom operators are only available through the library API");
  } else {
    r.fail("kind", "expected p_laplace or regularized");
  }
  try {
    op.scheme = scheme_from_name(r.str("scheme", scheme_name(op.scheme)));
  } catch (const std::invalid_argument& e) {
    r.fail("scheme", e.what());
  }
  return op;
}

SolveOptions read_solver(const Reader& r) {
  r.only({"tol_u", "tol_r", "max_sweeps", "order", "relaxation", "linear_warm_start", "newton_warm_start"});
  SolveOptions o;
  o.tol_u = r.num("tol_u", o.tol_u);
  o.tol_r = r.num("tol_r", o.tol_r);
  if (!(o.tol_u > 0.0)) r.fail("tol_u", "must be positive");
  if (!(o.tol_r > 0.0)) r.fail("tol_r", "must be positive");
  o.max_sweeps = r.integer("max_sweeps", o.max_sweeps);
  if (o.max_sweeps < 1) r.fail("max_sweeps", "must be at least 1");
  const std::string order = r.str("order", "lexicographic");
  if (order == "lexicographic") {
    o.order = SweepOrder::lexicographic;
  } else if (order == "red_black") {
    o.order = SweepOrder::red_black;
  } else {
    r.fail("order", "expected lexicographic or red_black");
  }
  o.relaxation = r.num("relaxation", 0.0);
  if (o.relaxation < 0.0 || o.relaxation >= 2.0) r.fail("relaxation", "must lie in [0, 2)");
  o.linear_warm_start = r.boolean("linear_warm_start", true);
  o.newton_warm_start = r.boolean("newton_warm_start", true);
  return o;
}

WienerProbeConfig read_probe(const Reader& r, int dim, const SolveOptions& solve) {
  WienerProbeConfig c;
  c.y = r.vec("y", dim);
  c.m = r.num("m", 1.0);
  c.rho0 = r.num("rho0");
  c.r0 = r.num("r0");
  c.K = static_cast<int>(r.integer("K", 3));
  c.h_levels = read_h_levels(r, "h_levels");
  c.decay = r.num("decay", c.decay);
  c.stagnation = r.num("stagnation", c.stagnation);
  c.min_radius_cells = r.num("min_radius_cells", c.min_radius_cells);
  c.coarse_to_fine = r.boolean("coarse_to_fine", true);
  try {
    c.placement = placement_from_name(r.str("placement", "enclosing"));
  } catch (const std::invalid_argument& e) {
    r.fail("placement", e.what());
  }
  c.solve = solve;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.where("") + "." + e.what());
  }
  return c;
}

std::optional<Verdict> read_verdict(const Reader& r, const std::string& key) {
  if (!r.has(key)) return std::nullopt;
  const std::string v = r.str(key);
  for (Verdict x : {Verdict::regular_trend, Verdict::irregular_trend, Verdict::inconclusive}) {
    if (verdict_name(x) == v) return x;
  }
  r.fail(key, "expected regular-trend, irregular-trend or inconclusive");
}

std::optional<bool> read_opt_bool(const Reader& r, const std::string& key) {
  if (!r.has(key)) return std::nullopt;
  return r.boolean(key, false);
}

TaskParams read_params(const std::string& task, const Reader& p, int dim, const SolveOptions& solve) {
  const std::optional<Reader> expect = p.opt_sub("expect");
  if (task == "dirichlet") {
    p.only({"h", "boundary", "exact", "centre", "generalized_steps", "mollifier", "expect"});
    DirichletTask t;
    t.h = p.positive("h");
    t.boundary = read_expression(p, "boundary", dim);
    if (p.has("exact")) t.exact = read_expression(p, "exact", dim);
    if (p.has("centre")) {
      const Vec c = p.vec("centre", dim);
      t.boundary.set_centre(c);
      if (t.exact) t.exact->set_centre(c);
    }
    t.generalized_steps = static_cast<int>(p.integer("generalized_steps", 0));
    if (t.generalized_steps < 0) p.fail("generalized_steps", "must be nonnegative");
    const std::string moll = p.str("mollifier", "bump");
    if (moll != "bump" && moll != "cube") p.fail("mollifier", "expected bump or cube");
    t.mollifier = moll == "bump" ? Mollifier::bump : Mollifier::cube;
    if (expect) {
      expect->only({"max_error"});
      t.expect_max_error = expect->opt_num("max_error");
    }
    return t;
  }
  if (task == "obstacle") {
    p.only({"h", "E", "m", "sign", "oracle", "expect"});
    ObstacleTask t;
    t.h = p.positive("h");
    t.e_shape = read_shape(p, "E", dim);
    t.m = p.positive("m");
    t.sign = static_cast<int>(p.integer("sign", 1));
    if (t.sign != 1 && t.sign != -1) p.fail("sign", "expected 1 or -1");
    if (const auto o = p.opt_sub("oracle")) {
      o->only({"center", "inner", "outer", "r_min", "r_max"});
      RadialOracle ro;
      ro.center = o->vec("center", dim);
      ro.inner = o->positive("inner");
      ro.outer = o->positive("outer");
      if (!(ro.inner < ro.outer)) o->fail("outer", "must exceed inner");
      ro.r_min = o->num("r_min", ro.inner);
      ro.r_max = o->num("r_max", ro.outer);
      if (!(ro.r_min <= ro.r_max)) o->fail("r_max", "must be at least r_min");
      t.oracle = ro;
    }
    if (expect) {
      expect->only({"max_relative_error"});
      t.expect_max_relative_error = expect->opt_num("max_relative_error");
    }
    return t;
  }
  if (task == "wiener-probe") {
    p.only({"y", "m", "rho0", "r0", "K", "h_levels", "decay", "stagnation", "min_radius_cells", "coarse_to_fine",
            "placement", "solid_angle", "lambda", "C1", "expect"});
    ProbeTask t;
    t.probe = read_probe(p, dim, solve);
    if (const auto sa = p.opt_sub("solid_angle")) {
      sa->only({"directions", "probes"});
      SolidAngleOptions o;
      o.directions = static_cast<int>(sa->integer("directions", o.directions));
      o.probes = static_cast<int>(sa->integer("probes", o.probes));
      if (o.directions < kMinDirections) sa->fail("directions", "must be at least " + std::to_string(kMinDirections));
      if (o.probes < kMinProbes) sa->fail("probes", "must be at least " + std::to_string(kMinProbes));
      t.extras.solid_angle = o;
    }
    t.extras.lambda = p.opt_num("lambda");
    t.extras.C1 = p.opt_num("C1");
    if (t.extras.C1 && !(*t.extras.C1 > 0.0)) p.fail("C1", "must be positive");
    if (expect) {
      expect->only({"verdict"});
      t.expect_verdict = read_verdict(*expect, "verdict");
    }
    return t;
  }
  if (task == "barrier") {
    p.only({"h", "y", "rho", "m", "deltas", "decay", "expect"});
    BarrierTask t;
    t.h = p.positive("h");
    t.y = p.vec("y", dim);
    t.rho = p.positive("rho");
    t.m = p.positive("m");
    t.deltas = p.nums("deltas");
    if (t.deltas.size() < 2) p.fail("deltas", "need at least two radii");
    for (double d : t.deltas) {
      if (!(d > 0.0)) p.fail("deltas", "radii must be positive");
    }
    t.decay = p.num("decay", 0.1);
    if (!(t.decay > 0.0 && t.decay < 1.0)) p.fail("decay", "must lie in (0, 1)");
    if (expect) {
      expect->only({"condition_jj"});
      t.expect_condition_jj = read_opt_bool(*expect, "condition_jj");
    }
    return t;
  }
  if (task == "degiorgi-instrument") {
    p.only({"h_levels", "E", "m", "y", "caccioppoli", "schedule", "oscillation", "envelope", "divergence", "expect"});
    DeGiorgiTask t;
    t.h_levels = read_h_levels(p, "h_levels");
    t.e_shape = read_shape(p, "E", dim);
    t.m = p.positive("m");
    t.y = p.vec("y", dim);
    if (p.has("caccioppoli")) {
      const json& arr = p.at("caccioppoli");
      if (!arr.is_array()) p.fail("caccioppoli", "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const Reader c(arr[i], p.where("caccioppoli[" + std::to_string(i) + "]"));
        c.only({"k", "rho", "R"});
        CaccioppoliSpec s{c.num("k"), c.positive("rho"), c.positive("R")};
        if (!(s.rho < s.R)) c.fail("R", "must exceed rho");
        t.caccioppoli.push_back(s);
      }
    }
    if (const auto s = p.opt_sub("schedule")) {
      s->only({"r0", "k0", "d", "steps", "search"});
      IterationSchedule sc;
      sc.y = t.y;
      sc.r0 = s->positive("r0");
      sc.k0 = s->num("k0");
      sc.d = s->positive("d");
      sc.steps = static_cast<int>(s->integer("steps", sc.steps));
      if (sc.steps < 1) s->fail("steps", "must be at least 1");
      t.schedule = sc;
      t.schedule_search = s->boolean("search", false);
    }
    if (const auto o = p.opt_sub("oscillation")) {
      o->only({"r0", "K"});
      const long K = o->integer("K");
      if (K < 0) o->fail("K", "must be nonnegative");
      t.oscillation = std::make_pair(o->positive("r0"), static_cast<int>(K));
    }
    if (const auto e = p.opt_sub("envelope")) {
      e->only({"C1", "sigma", "slack", "lower_order", "lower_order_c"});
      if (!t.oscillation) e->fail("", "needs an oscillation block");
      t.envelope_C1 = e->positive("C1");
      t.envelope.C1 = *t.envelope_C1;
      t.envelope.slack = e->num("slack", 2.0);
      t.envelope.lower_order = e->boolean("lower_order", false);
      t.envelope.lower_order_c = e->num("lower_order_c", 0.0);
      t.envelope_sigma = e->nums("sigma");
      if (t.envelope_sigma.size() != static_cast<std::size_t>(t.oscillation->second + 1)) {
        e->fail("sigma", "needs one value per oscillation radius (K + 1)");
      }
      for (double s : t.envelope_sigma) {
        if (s < 0.0 || s > 1.0) e->fail("sigma", "values must lie in [0, 1]");
      }
    }
    if (const auto d = p.opt_sub("divergence")) {
      d->only({"r0", "K"});
      const double r0 = d->positive("r0");
      if (!(r0 < 0.5)) d->fail("r0", "must be below 1/2");
      const long K = d->integer("K");
      if (K < 1) d->fail("K", "must be at least 1");
      t.divergence = std::make_pair(r0, K);
    }
    if (expect) {
      expect->only({"c_emp_ratio_max"});
      t.expect_c_emp_ratio_max = expect->opt_num("c_emp_ratio_max");
    }
    return t;
  }
  // locality
  p.only({"second", "r", "y", "m", "rho0", "r0", "K", "h_levels", "decay", "stagnation", "min_radius_cells",
          "coarse_to_fine", "placement", "expect"});
  LocalityTask t;
  try {
    t.second = ShapeSpec{dim, shape_from_json(p.at("second"), dim)};
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p.where("second") + ": " + e.what());
  }
  t.r = p.positive("r");
  t.probe = read_probe(p, dim, solve);
  if (expect) {
    expect->only({"same_verdict"});
    t.expect_same_verdict = read_opt_bool(*expect, "same_verdict");
  }
  return t;
}

// ---------------------------------------------------------------- serialization

json solve_json(const SolveReport& r) {
  return {{"iterations", r.iterations},
          {"energy", json_number(r.energy)},
          {"max_update", json_number(r.max_update)},
          {"max_residual", json_number(r.max_residual)},
          {"min_obstacle_residual", json_number(r.min_obstacle_residual)},
          {"contraction", json_number(r.contraction)},
          {"relaxation", json_number(r.relaxation)},
          {"converged", r.converged},
          {"energy_monotone", r.energy_monotone},
          {"energy_history", json_numbers(r.energy_history)},
          {"note", r.note}};
}

json operator_json(const OperatorSpec& op) {
  return {{"kind", op.kind_name()}, {"t", op.t},     {"a", op.a},
          {"p0", op.p0},           {"eps", op.eps}, {"scheme", scheme_name(op.scheme)}};
}

json solver_json(const SolveOptions& o) {
  return {{"tol_u", o.tol_u},
          {"tol_r", o.tol_r},
          {"max_sweeps", o.max_sweeps},
          {"order", o.order == SweepOrder::lexicographic ? "lexicographic" : "red_black"},
          {"relaxation", o.relaxation},
          {"linear_warm_start", o.linear_warm_start},
          {"newton_warm_start", o.newton_warm_start}};
}

json vec_json(const Vec& v, int dim) {
  json a = json::array();
  for (int k = 0; k < dim; ++k) a.push_back(v[k]);
  return a;
}

json check_json(const PotentialCheck& c) {
  return {{"min_u", json_number(c.min_u)},
          {"max_u", json_number(c.max_u)},
          {"bounds_ok", c.bounds_ok},
          {"equals_m_on_E", c.equals_m_on_E},
          {"residual_ok", c.residual_ok}};
}

json bools_json(const std::vector<bool>& v) {
  json a = json::array();
  for (bool b : v) a.push_back(b);
  return a;
}

json probe_json(const RegularityReport& r, int dim) {
  json levels = json::array();
  for (const ProbeLevel& l : r.levels) {
    levels.push_back({{"h", l.h},
                      {"omega", json_numbers(l.omega)},
                      {"deficit", json_numbers(l.deficit)},
                      {"used", bools_json(l.used)},
                      {"deficit_near_y", json_number(l.deficit_near_y)},
                      {"deficit_fixed", json_number(l.deficit_fixed)},
                      {"cap_nodes", l.cap_nodes},
                      {"cap_density", json_number(l.cap_density)},
                      {"sigma_nodes", l.sigma_nodes},
                      {"potential_check", check_json(l.check)},
                      {"solve", solve_json(l.report)}});
  }
  return {{"verdict", verdict_name(r.verdict)},
          {"reason", r.reason},
          {"y", vec_json(r.config.y, dim)},
          {"m", r.config.m},
          {"rho0", r.config.rho0},
          {"r0", r.config.r0},
          {"K", r.config.K},
          {"placement", placement_name(r.config.placement)},
          {"radii", json_numbers(r.radii)},
          {"stagnation_radius", json_number(r.stagnation_radius)},
          {"decay_ratio", json_number(r.decay_ratio)},
          {"decay_ok", r.decay_ok},
          {"near_deficit_shrinks", r.near_deficit_shrinks},
          {"stagnates", r.stagnates},
          {"potentials_ok", r.potentials_ok},
          {"density_2r", json_numbers(r.density_2r)},
          {"sigma_hat_2r", json_numbers(r.sigma_hat_2r)},
          {"diagnostics", r.diagnostics},
          {"levels", levels}};
}

Table probe_table(const std::string& name, const RegularityReport& r) {
  Table t{name, {"h", "k", "r_k", "omega", "deficit_near_y"}, {}};
  for (const ProbeLevel& l : r.levels) {
    for (std::size_t k = 0; k < r.radii.size(); ++k) {
      t.rows.push_back({l.h, static_cast<long>(k), r.radii[k], l.omega[k], l.deficit_near_y});
    }
  }
  return t;
}

void add_timing(ScenarioResult& res, const std::string& label, const SolveReport& r) {
  res.timings.push_back({{"solve", label}, {"wall_time", r.wall_time}});
}

void require(ScenarioResult& res, json& checks, const std::string& name, bool ok) {
  checks[name] = ok;
  if (!ok) {
    res.passed = false;
    res.failures.push_back(name);
  }
}

std::vector<std::size_t> e_nodes_of(const GridDomain& g, const Shape& e) {
  std::vector<std::size_t> out;
  for (std::size_t i : g.interior_nodes()) {
    if (e.classify(g.position(i), g.h()) != Membership::outside) out.push_back(i);
  }
  for (std::size_t i : g.boundary_nodes()) {
    if (e.classify(g.position(i), g.h()) != Membership::outside) {
      throw ConfigError("params.E: reaches the boundary of the solve region");
    }
  }
  return out;
}

// ---------------------------------------------------------------- tasks

void run_dirichlet(const Scenario& s, const DirichletTask& t, ScenarioResult& res, json& out, json& checks) {
  auto grid = build_grid(s.domain, t.h);
  const Expression bexpr = t.boundary;
  const BoundaryData phi{[bexpr](const Vec& x) { return bexpr(x); }, bexpr.text()};
  Field u;
  SolveReport rep;
  json gen = json::array();
  if (t.generalized_steps > 0) {
    GeneralizedSolution g = generalized_solution(grid, s.op, phi, t.generalized_steps, s.solve, t.mollifier);
    u = std::move(g.u);
    Table tab{"generalized", {"k", "width", "sup_change", "data_change", "contraction_ok"}, {}};
    for (const GeneralizedStep& st : g.steps) {
      gen.push_back({{"k", st.k},
                     {"width", st.width},
                     {"sup_change", json_number(st.sup_change)},
                     {"data_change", json_number(st.data_change)},
                     {"contraction_ok", st.contraction_ok},
                     {"solve", solve_json(st.report)}});
      tab.rows.push_back({static_cast<long>(st.k), st.width, st.sup_change, st.data_change,
                          std::string(st.contraction_ok ? "true" : "false")});
      add_timing(res, "generalized k=" + std::to_string(st.k), st.report);
      res.converged = res.converged && st.report.converged;
    }
    rep = g.steps.back().report;
    res.tables.push_back(std::move(tab));
    require(res, checks, "generalized_contraction", g.contraction_ok);
  } else {
    Solution sol = solve_dirichlet(grid, s.op, phi, s.solve);
    u = std::move(sol.u);
    rep = sol.report;
    add_timing(res, "dirichlet", rep);
    res.converged = rep.converged;
  }
  double bmin = std::numeric_limits<double>::infinity();
  double bmax = -bmin;
  for (std::size_t i : grid->boundary_nodes()) {
    bmin = std::min(bmin, u[i]);
    bmax = std::max(bmax, u[i]);
  }
  double umin = std::numeric_limits<double>::infinity();
  double umax = -umin;
  for (std::size_t i : grid->interior_nodes()) {
    umin = std::min(umin, u[i]);
    umax = std::max(umax, u[i]);
  }
  out["solve"] = solve_json(rep);
  out["nodes"] = grid->interior_nodes().size();
  out["boundary_min"] = json_number(bmin);
  out["boundary_max"] = json_number(bmax);
  out["interior_min"] = json_number(umin);
  out["interior_max"] = json_number(umax);
  if (!gen.empty()) out["generalized"] = gen;
  require(res, checks, "converged", res.converged);
  require(res, checks, "max_principle", umin >= bmin - s.solve.tol_u && umax <= bmax + s.solve.tol_u);

  Table energy{"energy", {"sweep", "energy"}, {}};
  for (std::size_t i = 0; i < rep.energy_history.size(); ++i) {
    energy.rows.push_back({static_cast<long>(i + 1), rep.energy_history[i]});
  }
  res.tables.push_back(std::move(energy));

  res.metric_name = "max_residual";
  res.metric = rep.max_residual;
  if (t.exact) {
    double err = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
      if (grid->label(i) != NodeLabel::exterior) err = std::max(err, std::abs(u[i] - (*t.exact)(grid->position(i))));
    }
    out["oracle"] = {{"exact", t.exact->text()}, {"max_error", err}};
    res.metric_name = "max_error";
    res.metric = err;
    if (t.expect_max_error) require(res, checks, "max_error", err <= *t.expect_max_error);
  }
}

double radial_exact(const OperatorSpec& op, int n, const RadialOracle& o, double m, double r) {
  if (op.t == static_cast<double>(n)) return m * std::log(o.outer / r) / std::log(o.outer / o.inner);
  const double a = (op.t - n) / (op.t - 1.0);
  return m * (std::pow(r, a) - std::pow(o.outer, a)) / (std::pow(o.inner, a) - std::pow(o.outer, a));
}

void run_obstacle(const Scenario& s, const ObstacleTask& t, ScenarioResult& res, json& out, json& checks) {
  auto grid = build_grid(s.domain, t.h);
  ObstacleConstraint c;
  c.nodes = e_nodes_of(*grid, t.e_shape);
  c.m = t.m;
  c.sign = t.sign;
  Solution sol = solve_obstacle(grid, c, s.op, s.solve);
  add_timing(res, "obstacle", sol.report);
  res.converged = sol.report.converged;
  const PotentialCheck pc = check_potential(sol.u, c.nodes, sol.report, t.sign, t.m, s.solve);
  out["solve"] = solve_json(sol.report);
  out["e_nodes"] = c.nodes.size();
  out["nodes"] = grid->interior_nodes().size();
  out["potential_check"] = check_json(pc);
  require(res, checks, "converged", res.converged);
  require(res, checks, "obstacle_bounds", pc.passed());
  res.metric_name = "max_residual";
  res.metric = sol.report.max_residual;

  if (t.oracle) {
    if (s.op.kind != OperatorKind::p_laplace || s.op.eps != 0.0) {
      throw ConfigError("params.oracle: the radial oracle needs a p_laplace operator with eps = 0");
    }
    const RadialOracle& o = *t.oracle;
    double worst = 0.0;
    double worst_r = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
      if (grid->label(i) == NodeLabel::exterior) continue;
      const double r = norm(grid->position(i) - o.center);
      if (r < o.r_min || r > o.r_max) continue;
      const double ex = t.sign * radial_exact(s.op, grid->dim(), o, t.m, r);
      const double rel = std::abs(sol.u[i] - ex) / std::abs(ex);
      if (rel > worst) {
        worst = rel;
        worst_r = r;
      }
    }
    Table prof{"profile", {"r", "u", "exact", "relative_error"}, {}};
    json pj = json::array();
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const Vec d = grid->position(i) - o.center;
      bool on_axis = d[0] >= -1e-12;
      for (int k = 1; k < grid->dim(); ++k) on_axis = on_axis && std::abs(d[k]) < 1e-9 * t.h;
      if (!on_axis || grid->label(i) == NodeLabel::exterior) continue;
      const double r = norm(d);
      if (r < o.inner || r > o.outer) continue;
      const double ex = t.sign * radial_exact(s.op, grid->dim(), o, t.m, r);
      const double rel = ex != 0.0 ? std::abs(sol.u[i] - ex) / std::abs(ex) : std::numeric_limits<double>::quiet_NaN();
      prof.rows.push_back({r, sol.u[i], ex, rel});
      pj.push_back({{"r", r}, {"u", sol.u[i]}, {"exact", ex}, {"relative_error", json_number(rel)}});
    }
    out["oracle"] = {{"kind", "radial"},
                     {"inner", o.inner},
                     {"outer", o.outer},
                     {"r_min", o.r_min},
                     {"r_max", o.r_max},
                     {"max_relative_error", worst},
                     {"at_radius", worst_r},
                     {"profile", pj}};
    res.tables.push_back(std::move(prof));
    res.metric_name = "max_relative_error";
    res.metric = worst;
    if (t.expect_max_relative_error) require(res, checks, "max_relative_error", worst <= *t.expect_max_relative_error);
  }
}

void run_probe(const Scenario& s, const ProbeTask& t, ScenarioResult& res, json& out, json& checks) {
  const RegularityReport r = wiener_probe(s.domain, s.op, t.probe);
  for (const ProbeLevel& l : r.levels) {
    add_timing(res, "probe h=" + format_number(l.h), l.report);
    res.converged = res.converged && l.report.converged;
  }
  out["probe"] = probe_json(r, s.domain.dim);
  res.tables.push_back(probe_table("probe", r));
  res.verdict = verdict_name(r.verdict);
  res.metric_name = "decay_ratio";
  res.metric = r.decay_ratio;

  // Criterion evaluations on the finest level at radii 2 r_k.
  std::vector<double> angle(r.radii.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> angle_se = angle;
  if (t.extras.solid_angle) {
    auto og = build_grid(s.domain, t.probe.h_levels.back());
    const std::size_t yi = node_at(*og, t.probe.y);
    const double big_r = enclosing_radius(*og);
    SolidAngleOptions so = *t.extras.solid_angle;
    for (std::size_t k = 0; k < r.radii.size(); ++k) {
      if (!(2.0 * r.radii[k] < 0.5 * big_r)) continue;
      so.seed = s.seed + k;
      const SolidAngleEstimate e = solid_angle_lower_bound(complement_cap(*og, yi, 2.0 * r.radii[k]), so);
      angle[k] = e.value;
      angle_se[k] = e.standard_error;
    }
  }
  std::vector<double> sigma_hat(r.radii.size());
  for (std::size_t k = 0; k < r.radii.size(); ++k) {
    const double a = std::isnan(angle[k]) ? 0.0 : angle[k];
    sigma_hat[k] = std::isnan(r.sigma_hat_2r[k]) ? r.sigma_hat_2r[k] : std::max(r.sigma_hat_2r[k], a);
  }
  Table crit{"criteria", {"k", "radius_2r", "density", "sigma_hat_volume", "solid_angle", "solid_angle_se", "sigma_hat"}, {}};
  for (std::size_t k = 0; k < r.radii.size(); ++k) {
    crit.rows.push_back({static_cast<long>(k), 2.0 * r.radii[k], r.density_2r[k], r.sigma_hat_2r[k], angle[k],
                         angle_se[k], sigma_hat[k]});
  }
  out["criteria"] = {{"radius_2r", json::array()},
                     {"solid_angle", json_numbers(angle)},
                     {"solid_angle_se", json_numbers(angle_se)},
                     {"sigma_hat", json_numbers(sigma_hat)}};
  for (double rk : r.radii) out["criteria"]["radius_2r"].push_back(2.0 * rk);
  res.tables.push_back(std::move(crit));

  if (t.extras.lambda) {
    std::vector<DensitySample> samples;
    for (std::size_t k = 0; k < r.radii.size(); ++k) {
      if (!std::isnan(sigma_hat[k])) samples.push_back({std::log(1.0 / (2.0 * r.radii[k])), sigma_hat[k]});
    }
    const DensityCriterionReport d = criterion_density(samples, s.op.t, *t.extras.lambda, std::log(1.0 / t.probe.rho0));
    json dj = json::array();
    for (const DensityCheck& c : d.checks) {
      dj.push_back({{"log_inv_rho", c.log_inv_rho},
                    {"lhs", json_number(c.lhs)},
                    {"rhs", json_number(c.rhs)},
                    {"holds", c.holds},
                    {"skipped", c.skipped}});
    }
    out["density_criterion"] = {{"lambda", *t.extras.lambda}, {"checks", dj}, {"verdict", d.verdict}, {"warnings", d.warnings}};
  }
  if (t.extras.C1) {
    const ProbeLevel& fine = r.levels.back();
    std::vector<double> sig;
    std::vector<double> om;
    for (std::size_t k = 0; k < r.radii.size(); ++k) {
      sig.push_back(std::isnan(sigma_hat[k]) ? 0.0 : std::clamp(sigma_hat[k], 0.0, 1.0));
      om.push_back(fine.omega[k]);
    }
    DecayOptions d;
    d.C1 = *t.extras.C1;
    const DecayReport dr = n0_and_decay(sig, s.op.t, t.probe.r0, om, d);
    Table env{"envelope", {"k", "r_k", "omega", "envelope", "n0", "eta"}, {}};
    json steps = json::array();
    for (const DecayStep& st : dr.steps) {
      env.rows.push_back({static_cast<long>(st.k), st.r, st.omega, st.envelope, st.n0, st.eta});
      steps.push_back({{"k", st.k},
                       {"r_k", st.r},
                       {"sigma", st.sigma},
                       {"n0", json_number(st.n0)},
                       {"eta", st.eta},
                       {"factor", st.factor},
                       {"envelope", json_number(st.envelope)},
                       {"omega", json_number(st.omega)},
                       {"below", st.below},
                       {"density_margin", json_number(st.density_margin)}});
    }
    out["envelope"] = {{"C1", d.C1}, {"slack", d.slack}, {"passed", dr.passed}, {"steps", steps}};
    res.tables.push_back(std::move(env));
  }
  require(res, checks, "converged", res.converged);
  require(res, checks, "potentials_ok", r.potentials_ok);
  if (t.expect_verdict) require(res, checks, "verdict", r.verdict == *t.expect_verdict);
}

void run_barrier(const Scenario& s, const BarrierTask& t, ScenarioResult& res, json& out, json& checks) {
  auto grid = build_grid(s.domain, t.h);
  const Barrier b = barrier_build(grid, s.op, t.y, t.rho, t.m, t.deltas, t.decay, s.solve);
  const BarrierReport& r = b.report;
  add_timing(res, "barrier V", r.v_report);
  add_timing(res, "barrier U", r.u_report);
  res.converged = r.v_report.converged && r.u_report.converged;
  out["barrier"] = {{"condition_j", r.condition_j},
                    {"nonnegative", r.nonnegative},
                    {"condition_jj", r.condition_jj},
                    {"deltas", json_numbers(r.deltas)},
                    {"max_v", json_numbers(r.max_v)},
                    {"ratio", json_number(r.ratio)},
                    {"v_solve", solve_json(r.v_report)},
                    {"u_solve", solve_json(r.u_report)}};
  Table tab{"barrier", {"delta", "max_v"}, {}};
  for (std::size_t i = 0; i < r.deltas.size(); ++i) tab.rows.push_back({r.deltas[i], r.max_v[i]});
  res.tables.push_back(std::move(tab));
  res.verdict = r.condition_jj ? "jj-holds" : "jj-fails";
  res.metric_name = "ratio";
  res.metric = r.ratio;
  require(res, checks, "converged", res.converged);
  require(res, checks, "condition_j", r.condition_j);
  require(res, checks, "nonnegative", r.nonnegative);
  if (t.expect_condition_jj) require(res, checks, "condition_jj", r.condition_jj == *t.expect_condition_jj);
}

json level_json(const LevelSetStats& l) {
  return {{"k", l.k}, {"rho", l.rho}, {"b", l.b}, {"u_int", l.u_int}, {"psi", l.psi}, {"nodes", l.nodes}};
}

void run_degiorgi(const Scenario& s, const DeGiorgiTask& t, ScenarioResult& res, json& out, json& checks) {
  const int n = s.domain.dim;
  const DeGiorgiConstants c = degiorgi_constants(s.op.t, n);
  out["constants"] = {{"theta", c.theta}, {"beta", c.beta}, {"theta1", c.theta1 ? json(*c.theta1) : json(nullptr)}};

  Table cac{"caccioppoli", {"h", "k", "rho", "R", "lhs", "rhs", "c_emp", "violation"}, {}};
  Table psi{"psi", {"h", "m", "k", "rho", "b", "u_int", "psi"}, {}};
  Table osc{"oscillation", {"h", "k", "r_k", "omega", "envelope", "n0", "eta"}, {}};
  json levels = json::array();
  std::vector<std::vector<double>> c_emp(t.caccioppoli.size());
  bool violation = false;
  bool bounds = true;
  for (double h : t.h_levels) {
    auto grid = build_grid(s.domain, h);
    ObstacleConstraint oc;
    oc.nodes = e_nodes_of(*grid, t.e_shape);
    oc.m = t.m;
    Solution sol = solve_obstacle(grid, oc, s.op, s.solve);
    add_timing(res, "obstacle h=" + format_number(h), sol.report);
    res.converged = res.converged && sol.report.converged;
    const PotentialCheck pc = check_potential(sol.u, oc.nodes, sol.report, 1, t.m, s.solve);
    bounds = bounds && pc.passed();
    json lv = {{"h", h}, {"solve", solve_json(sol.report)}, {"potential_check", check_json(pc)}};

    json cj = json::array();
    for (std::size_t i = 0; i < t.caccioppoli.size(); ++i) {
      const CaccioppoliSpec& cs = t.caccioppoli[i];
      const CaccioppoliResult cr = check_caccioppoli(sol.u, s.op, t.y, cs.k, cs.rho, cs.R);
      violation = violation || cr.violation;
      c_emp[i].push_back(cr.c_emp);
      cj.push_back({{"k", cr.k},
                    {"rho", cr.rho},
                    {"R", cr.R},
                    {"lhs", cr.lhs},
                    {"rhs", cr.rhs},
                    {"c_emp", cr.c_emp},
                    {"violation", cr.violation}});
      cac.rows.push_back({h, cr.k, cr.rho, cr.R, cr.lhs, cr.rhs, cr.c_emp, std::string(cr.violation ? "true" : "false")});
    }
    lv["caccioppoli"] = cj;

    if (t.schedule) {
      PsiRecursionReport pr;
      json sj;
      if (t.schedule_search) {
        const PsiThreshold th = psi_threshold_search(sol.u, s.op.t, *t.schedule);
        pr = th.report;
        sj["search"] = {{"d", th.d}, {"closed", th.closed}, {"iterations", th.iterations}};
      } else {
        pr = check_psi_recursion(sol.u, s.op.t, *t.schedule);
      }
      json pl = json::array();
      for (std::size_t m = 0; m < pr.levels.size(); ++m) {
        pl.push_back(level_json(pr.levels[m]));
        const LevelSetStats& l = pr.levels[m];
        psi.rows.push_back({h, static_cast<long>(m), l.k, l.rho, l.b, l.u_int, l.psi});
      }
      sj["levels"] = pl;
      sj["c_hat"] = pr.c_hat;
      sj["max_decay_ratio"] = pr.max_decay_ratio;
      sj["decay_ok"] = pr.decay_ok;
      sj["monotone"] = pr.monotone;
      sj["usable"] = pr.usable;
      sj["truncated"] = pr.truncated;
      sj["b_final"] = pr.b_final;
      lv["psi_recursion"] = sj;
    }

    if (t.oscillation) {
      const auto seq = oscillation_sequence(sol.u, t.y, t.oscillation->first, t.oscillation->second);
      std::vector<double> om;
      json oj = json::array();
      for (const OscillationSample& o : seq) {
        om.push_back(o.omega);
        oj.push_back({{"r", o.r}, {"inf", json_number(o.inf)}, {"sup", json_number(o.sup)}, {"omega", json_number(o.omega)}, {"used", o.used}});
      }
      lv["oscillation"] = oj;
      std::optional<DecayReport> dr;
      if (t.envelope_C1) {
        dr = n0_and_decay(t.envelope_sigma, s.op.t, t.oscillation->first, om, t.envelope);
        json steps = json::array();
        for (const DecayStep& st : dr->steps) {
          steps.push_back({{"k", st.k},
                           {"n0", json_number(st.n0)},
                           {"eta", st.eta},
                           {"factor", st.factor},
                           {"envelope", json_number(st.envelope)},
                           {"below", st.below},
                           {"density_margin", json_number(st.density_margin)}});
        }
        lv["envelope"] = {{"passed", dr->passed}, {"n0_bounds_ok", dr->n0_bounds_ok}, {"steps", steps}};
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t k = 0; k < seq.size(); ++k) {
        osc.rows.push_back({h, static_cast<long>(k), seq[k].r, seq[k].omega, dr ? dr->steps[k].envelope : nan,
                            dr ? dr->steps[k].n0 : nan, dr ? dr->steps[k].eta : nan});
      }
    }
    levels.push_back(lv);
  }
  out["levels"] = levels;
  if (t.divergence) {
    const double lp = divergence_log_product(t.divergence->first, t.divergence->second);
    out["divergence"] = {{"r0", t.divergence->first}, {"K", t.divergence->second}, {"log_product", lp}, {"product", std::exp(lp)}};
  }

  double worst = 1.0;
  for (const auto& v : c_emp) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] > 0.0 && v[i - 1] > 0.0) worst = std::max(worst, std::max(v[i] / v[i - 1], v[i - 1] / v[i]));
    }
  }
  out["c_emp_ratio_max"] = worst;
  res.metric_name = "c_emp_ratio_max";
  res.metric = worst;
  if (!cac.rows.empty()) res.tables.push_back(std::move(cac));
  if (!psi.rows.empty()) res.tables.push_back(std::move(psi));
  if (!osc.rows.empty()) res.tables.push_back(std::move(osc));
  require(res, checks, "converged", res.converged);
  require(res, checks, "obstacle_bounds", bounds);
  require(res, checks, "no_caccioppoli_violation", !violation);
  if (t.expect_c_emp_ratio_max) require(res, checks, "c_emp_ratio", worst <= *t.expect_c_emp_ratio_max);
}

void run_locality(const Scenario& s, const LocalityTask& t, ScenarioResult& res, json& out, json& checks) {
  const LocalityReport r = locality_check(s.domain, t.second, t.r, s.op, t.probe);
  for (const auto* p : {&r.first, &r.second}) {
    for (const ProbeLevel& l : p->levels) {
      add_timing(res, std::string(p == &r.first ? "first" : "second") + " h=" + format_number(l.h), l.report);
      res.converged = res.converged && l.report.converged;
    }
  }
  out["shapes_agree"] = r.shapes_agree;
  out["r"] = t.r;
  out["second_shape"] = to_json(t.second);
  out["first"] = probe_json(r.first, s.domain.dim);
  out["second"] = probe_json(r.second, s.domain.dim);
  out["same_verdict"] = r.passed;
  res.tables.push_back(probe_table("first", r.first));
  res.tables.push_back(probe_table("second", r.second));
  res.verdict = verdict_name(r.first.verdict) + "/" + verdict_name(r.second.verdict);
  res.metric_name = "same_verdict";
  res.metric = r.passed ? 1.0 : 0.0;
  require(res, checks, "converged", res.converged);
  if (t.expect_same_verdict) require(res, checks, "same_verdict", r.passed == *t.expect_same_verdict);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"dirichlet", "obstacle", "wiener-probe",
                                                 "barrier", "degiorgi-instrument", "locality"};
  return names;
}

Scenario parse_scenario(const json& doc) {
  const Reader r(doc, "");
  r.only({"name", "task", "seed", "domain", "operator", "solver", "params"});
  Scenario s;
  s.source = doc;
  s.name = r.str("name");
  if (s.name.empty()) r.fail("name", "must not be empty");
  for (char c : s.name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
      r.fail("name", "may only contain letters, digits, '-', '_' and '.'");
    }
  }
  s.task = r.str("task");
  const auto& names = task_names();
  if (std::find(names.begin(), names.end(), s.task) == names.end()) {
    r.fail("task", "unknown task '" + s.task + "'");
  }
  const long seed = r.integer("seed", 0);
  if (seed < 0) r.fail("seed", "must be nonnegative");
  s.seed = static_cast<std::uint64_t>(seed);
  try {
    s.domain = shape_spec_from_json(r.at("domain"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  s.op = read_operator(r.sub("operator"));
  s.solve = r.has("solver") ? read_solver(r.sub("solver")) : SolveOptions{};
  s.params = read_params(s.task, r.sub("params"), s.domain.dim, s.solve);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_scenario(doc);
}

ScenarioResult run_scenario(const Scenario& s) {
  const auto start = std::chrono::steady_clock::now();
  ScenarioResult res;
  res.timings = json::array();
  json result = json::object();
  json checks = json::object();
  try {
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, DirichletTask>) run_dirichlet(s, t, res, result, checks);
          if constexpr (std::is_same_v<T, ObstacleTask>) run_obstacle(s, t, res, result, checks);
          if constexpr (std::is_same_v<T, ProbeTask>) run_probe(s, t, res, result, checks);
          if constexpr (std::is_same_v<T, BarrierTask>) run_barrier(s, t, res, result, checks);
          if constexpr (std::is_same_v<T, DeGiorgiTask>) run_degiorgi(s, t, res, result, checks);
          if constexpr (std::is_same_v<T, LocalityTask>) run_locality(s, t, res, result, checks);
        },
        s.params);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    // Preconditions that depend on the discretization surface here (y off the lattice, ...).
    throw ConfigError(std::string("params: ") + e.what());
  }
  if (res.verdict.empty()) res.verdict = res.converged ? "converged" : "not-converged";
  res.report = {{"name", s.name},
                {"task", s.task},
                {"seed", s.seed},
                {"domain", to_json(s.domain)},
                {"operator", operator_json(s.op)},
                {"solver", solver_json(s.solve)},
                {"result", result},
                {"checks", checks},
                {"converged", res.converged},
                {"passed", res.passed},
                {"failures", res.failures}};
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::string config_hash(const json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(doc.dump())));
  return buf;
}

void write_artifacts(const Scenario& s, const ScenarioResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", r.report.dump(2) + "\n");
  json files = json::array({"report.json"});
  for (const Table& t : r.tables) {
    write_text(dir / (t.name + ".csv"), to_csv(t));
    files.push_back(t.name + ".csv");
  }
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  const json manifest = {{"name", s.name},
                         {"config_hash", config_hash(s.source)},
                         {"seed", s.seed},
                         {"versions",
                          {{"potlab", kVersion},
                           {"compiler", __VERSION__},
                           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)}}},
                         {"created", stamp},
                         {"wall_time", r.wall_time},
                         {"timings", r.timings},
                         {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace potlab
