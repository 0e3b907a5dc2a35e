#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "potlab/vec.hpp"

namespace potlab {

/// Three-valued point membership. Points on a primitive's boundary are
/// `boundary`; callers resolve them toward the exterior so that Omega stays open.
enum class Membership : std::uint8_t { outside, boundary, inside };

struct Ball {
  Vec center{};
  double radius = 0.0;
};

struct Box {
  Vec lo{};
  Vec hi{};
};

/// Open half-space {x : normal . x < offset}.
struct HalfSpace {
  Vec normal{};
  double offset = 0.0;
};

/// Solid truncated cone {|d|^2 < (1 + opening)(d . axis)^2, d . axis > 0, |d| < length}, d = x - vertex.
struct Cone {
  Vec vertex{};
  Vec axis{};
  double opening = 1.0;
  double length = 0.0;
};

/// Closed codimension-one truncated cone lying in the hyperplane through `vertex`
/// orthogonal to `normal`. On a lattice it is realised as a one-cell-thick layer.
struct FlatCone {
  Vec vertex{};
  Vec axis{};
  Vec normal{};
  double opening = 1.0;
  double length = 0.0;
};

/// Closed piecewise-flat cone whose pieces are each orthogonal to a coordinate axis.
/// In 2D: the two segments from the vertex along +e1 and +e2.
/// In 3D: {x3 = 0, 0 <= x1 <= x2} u {x1 = 0, x2 >= 0, x3 >= 0} u {x2 = 0, 0 <= x1 <= x3},
/// relative to the vertex and truncated at `length`.
struct TwistedCone {
  Vec vertex{};
  double length = 0.0;
  int dim = 3;
};

/// Solid cusp {|d'| < coefficient (d . axis)^exponent, d . axis > 0, |d| < length},
/// where d' is the component of d orthogonal to the axis.
struct PowerCusp {
  Vec vertex{};
  Vec axis{};
  double exponent = 1.0;
  double coefficient = 1.0;
  double length = 0.0;
};

/// A single point; on a lattice it selects at most one node.
struct Point {
  Vec position{};
};

using Primitive = std::variant<Ball, Box, HalfSpace, Cone, FlatCone, TwistedCone, PowerCusp, Point>;

struct Bounds {
  Vec lo{};
  Vec hi{};
};

/// Immutable constructive-geometry tree. Copies share structure.
class Shape {
 public:
  enum class Op : std::uint8_t { primitive, unite, intersect, complement };

  Shape(Primitive p);  // NOLINT(google-explicit-constructor)

  static Shape unite(std::vector<Shape> parts);
  static Shape intersect(std::vector<Shape> parts);
  static Shape complement(Shape s);
  static Shape difference(Shape a, Shape b);

  /// Membership of x. `h` is the lattice spacing used to thicken lower-dimensional
  /// pieces into node layers; h = 0 means exact (continuum) evaluation.
  [[nodiscard]] Membership classify(const Vec& x, double h) const;

  /// Axis-aligned bounds, or nullopt when the set is unbounded.
  [[nodiscard]] std::optional<Bounds> bounds(int dim) const;

  /// Appends every parameter s at which the line origin + s * dir may cross a
  /// primitive boundary or touch a lower-dimensional piece.
  void crossings(const Vec& origin, const Vec& dir, std::vector<double>& out) const;

  /// Smallest positive size parameter of any bounded primitive (infinity if none).
  [[nodiscard]] double min_feature() const;

  /// True when some primitive is only resolved up to sampling along a line (cusps).
  [[nodiscard]] bool needs_line_sampling() const;

  [[nodiscard]] Op op() const;
  [[nodiscard]] const Primitive* primitive() const;
  [[nodiscard]] const std::vector<Shape>& children() const;

 private:
  struct Node;
  explicit Shape(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

/// A shape together with its ambient dimension.
struct ShapeSpec {
  int dim = 2;
  Shape shape = Shape(Point{});
};

nlohmann::json to_json(const Shape& s, int dim);
nlohmann::json to_json(const ShapeSpec& spec);

/// Parses {"dim": N, "shape": {...}}. Throws std::invalid_argument with the
/// offending field name on malformed input.
ShapeSpec shape_spec_from_json(const nlohmann::json& j);
Shape shape_from_json(const nlohmann::json& j, int dim);

}  // namespace potlab
