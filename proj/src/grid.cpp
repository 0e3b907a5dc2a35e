#include "potlab/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace potlab {

GridDomain::GridDomain(ShapeSpec shape, double h, const GridOptions& options)
    : shape_(std::move(shape)), dim_(shape_.dim), h_(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("grid spacing h must be positive");
  if (dim_ != 2 && dim_ != 3) throw std::invalid_argument("dimension must be 2 or 3");
  const auto b = shape_.shape.bounds(dim_);
  if (!b) throw std::invalid_argument("shape is unbounded");
  for (int k = 0; k < dim_; ++k) {
    if (b->hi[k] < b->lo[k]) throw std::invalid_argument("empty interior");
  }

  const int margin = std::max(options.margin, 1);
  std::size_t total = 1;
  for (int k = 0; k < dim_; ++k) {
    lo_[k] = static_cast<long>(std::floor(b->lo[k] / h)) - margin;
    const long hi = static_cast<long>(std::ceil(b->hi[k] / h)) + margin;
    extent_[k] = hi - lo_[k] + 1;
    total *= static_cast<std::size_t>(extent_[k]);
  }
  stride_ = {1, extent_[0], extent_[0] * extent_[1]};
  for (int c = 0; c < corners(); ++c) {
    std::ptrdiff_t off = 0;
    for (int k = 0; k < dim_; ++k) {
      if (c & (1 << k)) off += stride_[k];
    }
    corner_offset_[c] = off;
  }

  labels_.assign(total, NodeLabel::exterior);
  for (std::size_t i = 0; i < total; ++i) {
    if (shape_.shape.classify(position(i), h_) == Membership::inside) labels_[i] = NodeLabel::interior;
  }

  // Interior nodes never touch the box faces because the box extends past the shape bounds.
  for (std::size_t i = 0; i < total; ++i) {
    if (labels_[i] != NodeLabel::interior) continue;
    const IVec l = lattice(i);
    for (int k = 0; k < dim_; ++k) {
      if (l[k] <= lo_[k] || l[k] >= lo_[k] + extent_[k] - 1) {
        throw std::logic_error("interior node on the grid face; shape bounds are inconsistent");
      }
    }
    interior_.push_back(i);
  }
  if (interior_.empty()) throw std::invalid_argument("empty interior");

  std::vector<char> cell_marked(total, 0);
  const int span = dim_ == 3 ? 1 : 0;
  for (std::size_t i : interior_) {
    for (int dz = -span; dz <= span; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t j = i + dx * stride_[0] + dy * stride_[1] + dz * stride_[2];
          if (labels_[j] == NodeLabel::exterior) {
            labels_[j] = NodeLabel::boundary;
          }
        }
      }
    }
    // Cells containing node i have base nodes i - corner_offset(b).
    for (int c = 0; c < corners(); ++c) cell_marked[i - corner_offset_[c]] = 1;
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (labels_[i] == NodeLabel::boundary) boundary_.push_back(i);
    if (cell_marked[i]) cells_.push_back(i);
  }

  const double feature = shape_.shape.min_feature();
  if (h_ > feature) {
    std::ostringstream msg;
    msg << "spacing h = " << h_ << " exceeds the smallest shape feature " << feature;
    warnings_.push_back(msg.str());
  }
}

IVec GridDomain::lattice(std::size_t i) const {
  IVec l{0, 0, 0};
  auto rem = static_cast<long>(i);
  for (int k = 0; k < dim_; ++k) {
    l[k] = lo_[k] + rem % extent_[k];
    rem /= extent_[k];
  }
  return l;
}

Vec GridDomain::position(std::size_t i) const {
  const IVec l = lattice(i);
  return {static_cast<double>(l[0]) * h_, static_cast<double>(l[1]) * h_, static_cast<double>(l[2]) * h_};
}

std::optional<std::size_t> GridDomain::index_of(const IVec& l) const {
  std::size_t idx = 0;
  for (int k = dim_ - 1; k >= 0; --k) {
    const long local = l[k] - lo_[k];
    if (local < 0 || local >= extent_[k]) return std::nullopt;
    idx = idx * static_cast<std::size_t>(extent_[k]) + static_cast<std::size_t>(local);
  }
  return idx;
}

std::vector<std::size_t> GridDomain::nodes_in_ball(const Vec& center, double radius) const {
  std::vector<std::size_t> out;
  IVec a{0, 0, 0};
  IVec b{0, 0, 0};
  for (int k = 0; k < dim_; ++k) {
    a[k] = std::max(lo_[k], static_cast<long>(std::floor((center[k] - radius) / h_)));
    b[k] = std::min(lo_[k] + extent_[k] - 1, static_cast<long>(std::ceil((center[k] + radius) / h_)));
  }
  const double r2 = radius * radius * (1.0 + 1e-12);
  IVec l{0, 0, 0};
  for (l[2] = a[2]; l[2] <= b[2]; ++l[2]) {
    for (l[1] = a[1]; l[1] <= b[1]; ++l[1]) {
      for (l[0] = a[0]; l[0] <= b[0]; ++l[0]) {
        Vec p{l[0] * h_, l[1] * h_, l[2] * h_};
        const Vec d = p - center;
        if (dot(d, d) <= r2) out.push_back(*index_of(l));
      }
    }
  }
  return out;
}

GridPtr build_grid(const ShapeSpec& shape, double h, const GridOptions& options) {
  return std::make_shared<const GridDomain>(shape, h, options);
}

}  // namespace potlab
