#pragma once

// A tiny arithmetic language for boundary data: numbers, x1..x3 (also x, y, z), r = |x - c|
// for a configured centre c, pi, e, + - * / ^, parentheses, and the functions
// abs sqrt exp log sin cos tan min max pow.

#include <memory>
#include <string>

#include "potlab/vec.hpp"

namespace potlab {

class Expression {
 public:
  /// Throws std::invalid_argument with the column of the first offending token.
  static Expression parse(const std::string& text, int dim);

  [[nodiscard]] double operator()(const Vec& x) const;
  [[nodiscard]] const std::string& text() const { return text_; }
  void set_centre(const Vec& c) { centre_ = c; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  Vec centre_{};
};

}  // namespace potlab
