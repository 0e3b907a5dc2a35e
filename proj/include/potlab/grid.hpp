#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "potlab/shape.hpp"
#include "potlab/vec.hpp"

namespace potlab {

enum class NodeLabel : std::uint8_t { exterior, boundary, interior };

struct GridOptions {
  /// Extra empty cells added around the shape bounds on every side.
  int margin = 1;
};

/// Cartesian lattice {i * h} restricted to a box around a shape, with every node
/// labelled interior (in Omega), boundary (outside Omega but sharing a cell with an
/// interior node) or exterior. Lattices with the same h are aligned, so lattice
/// coordinates identify the same point across grids.
class GridDomain {
 public:
  GridDomain(ShapeSpec shape, double h, const GridOptions& options = {});

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double h() const { return h_; }
  [[nodiscard]] const ShapeSpec& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return labels_.size(); }

  /// Lattice coordinates of the lowest corner node and node counts per axis.
  [[nodiscard]] const IVec& lo() const { return lo_; }
  [[nodiscard]] const IVec& extent() const { return extent_; }
  [[nodiscard]] std::ptrdiff_t stride(int axis) const { return stride_[axis]; }

  [[nodiscard]] NodeLabel label(std::size_t i) const { return labels_[i]; }
  [[nodiscard]] bool is_interior(std::size_t i) const { return labels_[i] == NodeLabel::interior; }
  [[nodiscard]] IVec lattice(std::size_t i) const;
  [[nodiscard]] Vec position(std::size_t i) const;
  [[nodiscard]] std::optional<std::size_t> index_of(const IVec& lattice) const;

  [[nodiscard]] const std::vector<std::size_t>& interior_nodes() const { return interior_; }
  [[nodiscard]] const std::vector<std::size_t>& boundary_nodes() const { return boundary_; }

  /// Lowest-corner node index of each cell with at least one interior corner.
  [[nodiscard]] const std::vector<std::size_t>& active_cells() const { return cells_; }
  [[nodiscard]] int corners() const { return 1 << dim_; }
  /// Index offset from a cell's base node to corner b (bit k of b = offset along axis k).
  [[nodiscard]] std::ptrdiff_t corner_offset(int b) const { return corner_offset_[b]; }

  [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }

  /// Node indices whose position lies in the closed ball I(center, radius).
  [[nodiscard]] std::vector<std::size_t> nodes_in_ball(const Vec& center, double radius) const;

 private:
  ShapeSpec shape_;
  int dim_;
  double h_;
  IVec lo_{};
  IVec extent_{1, 1, 1};
  std::array<std::ptrdiff_t, 3> stride_{};
  std::array<std::ptrdiff_t, 8> corner_offset_{};
  std::vector<NodeLabel> labels_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> cells_;
  std::vector<std::string> warnings_;
};

using GridPtr = std::shared_ptr<const GridDomain>;

/// Throws std::invalid_argument for h <= 0, unbounded shapes and empty interiors.
GridPtr build_grid(const ShapeSpec& shape, double h, const GridOptions& options = {});

/// Node values on a grid. Exterior entries are stored but carry no meaning.
struct Field {
  GridPtr grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(GridPtr g, double fill = 0.0) : grid(std::move(g)), values(grid->size(), fill) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

}  // namespace potlab
