#include "potlab/shape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace potlab {
namespace {

constexpr double kTie = 1e-12;

Membership from_margin(double g) {
  if (g < -kTie) return Membership::inside;
  if (g > kTie) return Membership::outside;
  return Membership::boundary;
}

// Membership of {all g_i < 0}.
Membership from_margins(std::initializer_list<double> gs) {
  return from_margin(*std::max_element(gs.begin(), gs.end()));
}

double layer_half_width(double h) { return h > 0.0 ? 0.5 * h - kTie : kTie; }

Membership closed(bool in) { return in ? Membership::inside : Membership::outside; }

void push_quadratic_roots(double a, double b, double c, std::vector<double>& out) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (scale == 0.0) return;
  if (std::abs(a) <= 1e-14 * scale) {
    if (b != 0.0) out.push_back(-c / b);
    return;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return;
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  out.push_back(q / a);
  if (q != 0.0) out.push_back(c / q);
}

void push_plane(const Vec& n, double offset, const Vec& o, const Vec& dir, std::vector<double>& out) {
  const double nd = dot(n, dir);
  if (nd != 0.0) out.push_back((offset - dot(n, o)) / nd);
}

void push_sphere(const Vec& c, double r, const Vec& o, const Vec& dir, std::vector<double>& out) {
  const Vec d0 = o - c;
  push_quadratic_roots(dot(dir, dir), 2.0 * dot(d0, dir), dot(d0, d0) - r * r, out);
}

Vec require_unit(const Vec& v, const char* what) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument(std::string(what) + " must be a nonzero vector");
  return (1.0 / n) * v;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
}

struct Normalizer {
  Primitive operator()(Ball b) const {
    require_positive(b.radius, "ball.radius");
    return b;
  }
  Primitive operator()(Box b) const {
    bool any = false;
    for (int k = 0; k < kMaxDim; ++k) {
      if (b.hi[k] < b.lo[k]) throw std::invalid_argument("box.hi must not be below box.lo");
      any = any || b.hi[k] > b.lo[k];
    }
    if (!any) throw std::invalid_argument("box must have positive extent");
    return b;
  }
  Primitive operator()(HalfSpace s) const {
    const double n = norm(s.normal);
    s.normal = require_unit(s.normal, "halfspace.normal");
    s.offset /= n;
    return s;
  }
  Primitive operator()(Cone c) const {
    c.axis = require_unit(c.axis, "cone.axis");
    require_positive(c.opening, "cone.opening");
    require_positive(c.length, "cone.length");
    return c;
  }
  Primitive operator()(FlatCone c) const {
    c.normal = require_unit(c.normal, "flat_cone.normal");
    Vec a = c.axis - dot(c.axis, c.normal) * c.normal;
    c.axis = require_unit(a, "flat_cone.axis (in-plane part)");
    require_positive(c.opening, "flat_cone.opening");
    require_positive(c.length, "flat_cone.length");
    return c;
  }
  Primitive operator()(TwistedCone c) const {
    require_positive(c.length, "twisted_cone.length");
    if (c.dim != 2 && c.dim != 3) throw std::invalid_argument("twisted_cone.dim must be 2 or 3");
    return c;
  }
  Primitive operator()(PowerCusp c) const {
    c.axis = require_unit(c.axis, "power_cusp.axis");
    require_positive(c.exponent, "power_cusp.exponent");
    require_positive(c.coefficient, "power_cusp.coefficient");
    require_positive(c.length, "power_cusp.length");
    return c;
  }
  Primitive operator()(Point p) const { return p; }
};

struct Classifier {
  const Vec& x;
  double h;

  Membership operator()(const Ball& b) const { return from_margin(norm(x - b.center) - b.radius); }

  Membership operator()(const Box& b) const {
    double g = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kMaxDim; ++k) {
      if (b.hi[k] == b.lo[k]) continue;
      g = std::max({g, b.lo[k] - x[k], x[k] - b.hi[k]});
    }
    return from_margin(g);
  }

  Membership operator()(const HalfSpace& s) const { return from_margin(dot(s.normal, x) - s.offset); }

  Membership operator()(const Cone& c) const {
    const Vec d = x - c.vertex;
    const double s = dot(d, c.axis);
    const double r = norm(d);
    return from_margins({r - c.length, -s, r - std::sqrt(1.0 + c.opening) * s});
  }

  Membership operator()(const FlatCone& c) const {
    const Vec d = x - c.vertex;
    const double off = dot(d, c.normal);
    if (std::abs(off) >= layer_half_width(h) && !(h == 0.0 && std::abs(off) <= kTie)) return Membership::outside;
    const Vec p = d - off * c.normal;
    const double s = dot(p, c.axis);
    const double r = norm(p);
    return closed(s >= -kTie && r <= c.length + kTie && r <= std::sqrt(1.0 + c.opening) * s + kTie);
  }

  Membership operator()(const TwistedCone& c) const {
    const Vec d = x - c.vertex;
    const double w = layer_half_width(h);
    auto in_layer = [&](int k) { return h > 0.0 ? std::abs(d[k]) < w : std::abs(d[k]) <= kTie; };
    auto in_plane_norm = [&](int k) {
      Vec p = d;
      p[k] = 0.0;
      return norm(p) <= c.length + kTie;
    };
    if (c.dim == 2) {
      const bool a = in_layer(1) && d[0] >= -kTie && in_plane_norm(1);
      const bool b = in_layer(0) && d[1] >= -kTie && in_plane_norm(0);
      return closed(a || b);
    }
    const bool s3 = in_layer(2) && d[0] >= -kTie && d[0] <= d[1] + kTie && in_plane_norm(2);
    const bool s1 = in_layer(0) && d[1] >= -kTie && d[2] >= -kTie && in_plane_norm(0);
    const bool s2 = in_layer(1) && d[0] >= -kTie && d[0] <= d[2] + kTie && in_plane_norm(1);
    return closed(s1 || s2 || s3);
  }

  Membership operator()(const PowerCusp& c) const {
    const Vec d = x - c.vertex;
    const double s = dot(d, c.axis);
    const double perp = norm(d - s * c.axis);
    const double env = c.coefficient * std::pow(std::max(s, 0.0), c.exponent);
    return from_margins({norm(d) - c.length, -s, perp - env});
  }

  Membership operator()(const Point& p) const {
    double m = 0.0;
    for (int k = 0; k < kMaxDim; ++k) m = std::max(m, std::abs(x[k] - p.position[k]));
    return closed(h > 0.0 ? m < layer_half_width(h) : m <= kTie);
  }
};

}  // namespace

struct Shape::Node {
  Op op = Op::primitive;
  Primitive prim;
  std::vector<Shape> children;
};

Shape::Shape(Primitive p) {
  auto node = std::make_shared<Node>();
  node->prim = std::visit(Normalizer{}, std::move(p));
  node_ = std::move(node);
}

Shape::Shape(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Shape Shape::unite(std::vector<Shape> parts) {
  if (parts.empty()) throw std::invalid_argument("union needs at least one operand");
  auto node = std::make_shared<Node>();
  node->op = Op::unite;
  node->children = std::move(parts);
  return Shape(std::shared_ptr<const Node>(std::move(node)));
}

Shape Shape::intersect(std::vector<Shape> parts) {
  if (parts.empty()) throw std::invalid_argument("intersection needs at least one operand");
  auto node = std::make_shared<Node>();
  node->op = Op::intersect;
  node->children = std::move(parts);
  return Shape(std::shared_ptr<const Node>(std::move(node)));
}

Shape Shape::complement(Shape s) {
  auto node = std::make_shared<Node>();
  node->op = Op::complement;
  node->children.push_back(std::move(s));
  return Shape(std::shared_ptr<const Node>(std::move(node)));
}

Shape Shape::difference(Shape a, Shape b) { return intersect({std::move(a), complement(std::move(b))}); }

Shape::Op Shape::op() const { return node_->op; }
const Primitive* Shape::primitive() const { return node_->op == Op::primitive ? &node_->prim : nullptr; }
const std::vector<Shape>& Shape::children() const { return node_->children; }

Membership Shape::classify(const Vec& x, double h) const {
  switch (node_->op) {
    case Op::primitive:
      return std::visit(Classifier{x, h}, node_->prim);
    case Op::complement: {
      const Membership m = node_->children.front().classify(x, h);
      if (m == Membership::inside) return Membership::outside;
      if (m == Membership::outside) return Membership::inside;
      return Membership::boundary;
    }
    case Op::unite: {
      Membership best = Membership::outside;
      for (const auto& c : node_->children) {
        const Membership m = c.classify(x, h);
        if (m == Membership::inside) return m;
        if (m == Membership::boundary) best = m;
      }
      return best;
    }
    case Op::intersect: {
      Membership worst = Membership::inside;
      for (const auto& c : node_->children) {
        const Membership m = c.classify(x, h);
        if (m == Membership::outside) return m;
        if (m == Membership::boundary) worst = m;
      }
      return worst;
    }
  }
  return Membership::outside;
}

namespace {

Bounds around(const Vec& c, double r) { return {c - Vec{r, r, r}, c + Vec{r, r, r}}; }

struct BoundsOf {
  std::optional<Bounds> operator()(const Ball& b) const { return around(b.center, b.radius); }
  std::optional<Bounds> operator()(const Box& b) const { return Bounds{b.lo, b.hi}; }
  std::optional<Bounds> operator()(const HalfSpace&) const { return std::nullopt; }
  std::optional<Bounds> operator()(const Cone& c) const { return around(c.vertex, c.length); }
  std::optional<Bounds> operator()(const FlatCone& c) const { return around(c.vertex, c.length); }
  std::optional<Bounds> operator()(const TwistedCone& c) const { return around(c.vertex, c.length); }
  std::optional<Bounds> operator()(const PowerCusp& c) const { return around(c.vertex, c.length); }
  std::optional<Bounds> operator()(const Point& p) const { return Bounds{p.position, p.position}; }
};

struct CrossingsOf {
  const Vec& o;
  const Vec& dir;
  std::vector<double>& out;

  void operator()(const Ball& b) const { push_sphere(b.center, b.radius, o, dir, out); }
  void operator()(const Box& b) const {
    for (int k = 0; k < kMaxDim; ++k) {
      if (b.hi[k] == b.lo[k] || dir[k] == 0.0) continue;
      out.push_back((b.lo[k] - o[k]) / dir[k]);
      out.push_back((b.hi[k] - o[k]) / dir[k]);
    }
  }
  void operator()(const HalfSpace& s) const { push_plane(s.normal, s.offset, o, dir, out); }
  void operator()(const Cone& c) const {
    push_sphere(c.vertex, c.length, o, dir, out);
    push_plane(c.axis, dot(c.axis, c.vertex), o, dir, out);
    const Vec d0 = o - c.vertex;
    const double w = 1.0 + c.opening;
    const double da = dot(d0, c.axis);
    const double ea = dot(dir, c.axis);
    push_quadratic_roots(dot(dir, dir) - w * ea * ea, 2.0 * (dot(d0, dir) - w * da * ea), dot(d0, d0) - w * da * da, out);
  }
  void operator()(const FlatCone& c) const { push_plane(c.normal, dot(c.normal, c.vertex), o, dir, out); }
  void operator()(const TwistedCone& c) const {
    for (int k = 0; k < c.dim; ++k) {
      if (dir[k] != 0.0) out.push_back((c.vertex[k] - o[k]) / dir[k]);
    }
  }
  void operator()(const PowerCusp& c) const {
    push_sphere(c.vertex, c.length, o, dir, out);
    push_plane(c.axis, dot(c.axis, c.vertex), o, dir, out);
  }
  void operator()(const Point&) const {}
};

struct FeatureOf {
  double operator()(const Ball& b) const { return b.radius; }
  double operator()(const Box& b) const {
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kMaxDim; ++k) {
      if (b.hi[k] > b.lo[k]) m = std::min(m, b.hi[k] - b.lo[k]);
    }
    return m;
  }
  double operator()(const HalfSpace&) const { return std::numeric_limits<double>::infinity(); }
  double operator()(const Cone& c) const { return c.length; }
  double operator()(const FlatCone& c) const { return c.length; }
  double operator()(const TwistedCone& c) const { return c.length; }
  double operator()(const PowerCusp& c) const { return c.length; }
  // A point is deliberately below lattice resolution.
  double operator()(const Point&) const { return std::numeric_limits<double>::infinity(); }
};

}  // namespace

std::optional<Bounds> Shape::bounds(int dim) const {
  std::optional<Bounds> result;
  switch (node_->op) {
    case Op::primitive:
      result = std::visit(BoundsOf{}, node_->prim);
      break;
    case Op::complement:
      return std::nullopt;
    case Op::unite:
      for (const auto& c : node_->children) {
        auto b = c.bounds(dim);
        if (!b) return std::nullopt;
        if (!result) {
          result = b;
          continue;
        }
        for (int k = 0; k < kMaxDim; ++k) {
          result->lo[k] = std::min(result->lo[k], b->lo[k]);
          result->hi[k] = std::max(result->hi[k], b->hi[k]);
        }
      }
      break;
    case Op::intersect:
      for (const auto& c : node_->children) {
        auto b = c.bounds(dim);
        if (!b) continue;
        if (!result) {
          result = b;
          continue;
        }
        for (int k = 0; k < kMaxDim; ++k) {
          result->lo[k] = std::max(result->lo[k], b->lo[k]);
          result->hi[k] = std::min(result->hi[k], b->hi[k]);
        }
      }
      break;
  }
  if (result) {
    for (int k = dim; k < kMaxDim; ++k) result->lo[k] = result->hi[k] = 0.0;
  }
  return result;
}

void Shape::crossings(const Vec& origin, const Vec& dir, std::vector<double>& out) const {
  if (node_->op == Op::primitive) {
    std::visit(CrossingsOf{origin, dir, out}, node_->prim);
    return;
  }
  for (const auto& c : node_->children) c.crossings(origin, dir, out);
}

double Shape::min_feature() const {
  if (node_->op == Op::primitive) return std::visit(FeatureOf{}, node_->prim);
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : node_->children) m = std::min(m, c.min_feature());
  return m;
}

bool Shape::needs_line_sampling() const {
  if (node_->op == Op::primitive) return std::holds_alternative<PowerCusp>(node_->prim);
  return std::any_of(node_->children.begin(), node_->children.end(),
                     [](const Shape& c) { return c.needs_line_sampling(); });
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json vec_json(const Vec& v, int dim) {
  json a = json::array();
  for (int k = 0; k < dim; ++k) a.push_back(v[k]);
  return a;
}

const json& field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw std::invalid_argument(where + "." + name + ": missing");
  return j.at(name);
}

double num(const json& j, const char* name, const std::string& where) {
  const json& v = field(j, name, where);
  if (!v.is_number()) throw std::invalid_argument(where + "." + name + ": expected a number");
  return v.get<double>();
}

Vec vec(const json& j, const char* name, const std::string& where, int dim) {
  const json& v = field(j, name, where);
  if (!v.is_array() || static_cast<int>(v.size()) != dim) {
    throw std::invalid_argument(where + "." + name + ": expected an array of " + std::to_string(dim) + " numbers");
  }
  Vec out{};
  for (int k = 0; k < dim; ++k) {
    if (!v[k].is_number()) throw std::invalid_argument(where + "." + name + ": expected numbers");
    out[k] = v[k].get<double>();
  }
  return out;
}

struct PrimitiveJson {
  int dim;
  json operator()(const Ball& b) const {
    return {{"type", "ball"}, {"center", vec_json(b.center, dim)}, {"radius", b.radius}};
  }
  json operator()(const Box& b) const { return {{"type", "box"}, {"lo", vec_json(b.lo, dim)}, {"hi", vec_json(b.hi, dim)}}; }
  json operator()(const HalfSpace& s) const {
    return {{"type", "halfspace"}, {"normal", vec_json(s.normal, dim)}, {"offset", s.offset}};
  }
  json operator()(const Cone& c) const {
    return {{"type", "cone"},
            {"vertex", vec_json(c.vertex, dim)},
            {"axis", vec_json(c.axis, dim)},
            {"opening", c.opening},
            {"length", c.length}};
  }
  json operator()(const FlatCone& c) const {
    return {{"type", "flat_cone"},
            {"vertex", vec_json(c.vertex, dim)},
            {"axis", vec_json(c.axis, dim)},
            {"normal", vec_json(c.normal, dim)},
            {"opening", c.opening},
            {"length", c.length}};
  }
  json operator()(const TwistedCone& c) const {
    return {{"type", "twisted_cone"}, {"vertex", vec_json(c.vertex, dim)}, {"length", c.length}};
  }
  json operator()(const PowerCusp& c) const {
    return {{"type", "power_cusp"},
            {"vertex", vec_json(c.vertex, dim)},
            {"axis", vec_json(c.axis, dim)},
            {"exponent", c.exponent},
            {"coefficient", c.coefficient},
            {"length", c.length}};
  }
  json operator()(const Point& p) const { return {{"type", "point"}, {"position", vec_json(p.position, dim)}}; }
};

std::vector<Shape> operands(const json& j, const std::string& where, int dim) {
  const json& of = field(j, "of", where);
  if (!of.is_array() || of.empty()) throw std::invalid_argument(where + ".of: expected a nonempty array");
  std::vector<Shape> out;
  for (std::size_t i = 0; i < of.size(); ++i) out.push_back(shape_from_json(of[i], dim));
  return out;
}

Shape parse_shape(const json& j, int dim, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  const json& tj = field(j, "type", where);
  if (!tj.is_string()) throw std::invalid_argument(where + ".type: expected a string");
  const std::string type = tj.get<std::string>();
  const std::string at = where + "(" + type + ")";
  try {
    if (type == "ball") return Shape(Ball{vec(j, "center", at, dim), num(j, "radius", at)});
    if (type == "box") {
      Box b{vec(j, "lo", at, dim), vec(j, "hi", at, dim)};
      for (int k = 0; k < dim; ++k) {
        if (!(b.hi[k] > b.lo[k])) throw std::invalid_argument(at + ".hi: must exceed lo on every axis");
      }
      return Shape(b);
    }
    if (type == "halfspace") return Shape(HalfSpace{vec(j, "normal", at, dim), num(j, "offset", at)});
    if (type == "cone") {
      return Shape(Cone{vec(j, "vertex", at, dim), vec(j, "axis", at, dim), num(j, "opening", at), num(j, "length", at)});
    }
    if (type == "flat_cone") {
      return Shape(FlatCone{vec(j, "vertex", at, dim), vec(j, "axis", at, dim), vec(j, "normal", at, dim),
                            num(j, "opening", at), num(j, "length", at)});
    }
    if (type == "twisted_cone") return Shape(TwistedCone{vec(j, "vertex", at, dim), num(j, "length", at), dim});
    if (type == "power_cusp") {
      return Shape(PowerCusp{vec(j, "vertex", at, dim), vec(j, "axis", at, dim), num(j, "exponent", at),
                             num(j, "coefficient", at), num(j, "length", at)});
    }
    if (type == "point") return Shape(Point{vec(j, "position", at, dim)});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(at + ": " + e.what());
  }
  if (type == "union") return Shape::unite(operands(j, at, dim));
  if (type == "intersection") return Shape::intersect(operands(j, at, dim));
  if (type == "complement") return Shape::complement(shape_from_json(field(j, "of", at), dim));
  if (type == "difference") {
    auto ops = operands(j, at, dim);
    if (ops.size() != 2) throw std::invalid_argument(at + ".of: difference takes exactly two operands");
    return Shape::difference(ops[0], ops[1]);
  }
  throw std::invalid_argument(where + ".type: unknown shape type '" + type + "'");
}

}  // namespace

nlohmann::json to_json(const Shape& s, int dim) {
  switch (s.op()) {
    case Shape::Op::primitive:
      return std::visit(PrimitiveJson{dim}, *s.primitive());
    case Shape::Op::complement:
      return {{"type", "complement"}, {"of", to_json(s.children().front(), dim)}};
    case Shape::Op::unite:
    case Shape::Op::intersect: {
      json of = json::array();
      for (const auto& c : s.children()) of.push_back(to_json(c, dim));
      return {{"type", s.op() == Shape::Op::unite ? "union" : "intersection"}, {"of", of}};
    }
  }
  return {};
}

nlohmann::json to_json(const ShapeSpec& spec) { return {{"dim", spec.dim}, {"shape", to_json(spec.shape, spec.dim)}}; }

Shape shape_from_json(const nlohmann::json& j, int dim) { return parse_shape(j, dim, "shape"); }

ShapeSpec shape_spec_from_json(const nlohmann::json& j) {
  const json& d = field(j, "dim", "domain");
  if (!d.is_number_integer() || (d.get<int>() != 2 && d.get<int>() != 3)) {
    throw std::invalid_argument("domain.dim: must be 2 or 3");
  }
  const int dim = d.get<int>();
  return ShapeSpec{dim, parse_shape(field(j, "shape", "domain"), dim, "domain.shape")};
}

}  // namespace potlab
