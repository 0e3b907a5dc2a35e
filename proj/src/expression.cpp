#include "potlab/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace potlab {

struct Expression::Node {
  enum class Kind { number, coord, radius, neg, add, sub, mul, div, pow, call } kind;
  double value = 0.0;
  int index = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

struct FnInfo {
  const char* name;
  int arity;
};

constexpr FnInfo kFunctions[] = {{"abs", 1}, {"sqrt", 1}, {"exp", 1}, {"log", 1}, {"sin", 1}, {"cos", 1},
                                 {"tan", 1}, {"min", 2}, {"max", 2}, {"pow", 2}};

NodePtr make(Kind k, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  Parser(const std::string& s, int dim) : s_(s), dim_(dim) {}

  NodePtr parse() {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression '" + s_ + "' column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (eat('+')) {
        n = make(Kind::add, {n, product()});
      } else if (eat('-')) {
        n = make(Kind::sub, {n, product()});
      } else {
        return n;
      }
    }
  }

  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (eat('*')) {
        n = make(Kind::mul, {n, unary()});
      } else if (eat('/')) {
        n = make(Kind::div, {n, unary()});
      } else {
        return n;
      }
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Kind::neg, {unary()});
    if (eat('+')) return unary();
    return power();
  }

  // Right associative; binds tighter than unary minus on its left: -x^2 = -(x^2).
  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return make(Kind::pow, {base, unary()});
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = sum();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    double v = 0.0;
    const char* first = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
    if (ec != std::errc() || ptr == first) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::number;
    n->value = v;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string id = s_.substr(start, pos_ - start);
    auto n = std::make_shared<Expression::Node>();
    if (id == "pi" || id == "e") {
      n->kind = Kind::number;
      n->value = id == "pi" ? M_PI : M_E;
      return n;
    }
    if (id == "r") {
      n->kind = Kind::radius;
      return n;
    }
    int coord = -1;
    if (id == "x" || id == "x1") coord = 0;
    if (id == "y" || id == "x2") coord = 1;
    if (id == "z" || id == "x3") coord = 2;
    if (coord >= 0) {
      if (coord >= dim_) {
        pos_ = start;
        fail("coordinate '" + id + "' exceeds dimension " + std::to_string(dim_));
      }
      n->kind = Kind::coord;
      n->index = coord;
      return n;
    }
    for (const FnInfo& f : kFunctions) {
      if (id != f.name) continue;
      if (!eat('(')) fail("expected '(' after " + id);
      n->kind = Kind::call;
      n->fn = id;
      for (int a = 0; a < f.arity; ++a) {
        if (a > 0 && !eat(',')) fail(id + " takes " + std::to_string(f.arity) + " arguments");
        n->args.push_back(sum());
      }
      if (!eat(')')) fail("expected ')' to close " + id);
      return n;
    }
    pos_ = start;
    fail("unknown name '" + id + "'");
  }

  const std::string& s_;
  int dim_;
  std::size_t pos_ = 0;
};

double eval(const Expression::Node& n, const Vec& x, const Vec& centre) {
  auto arg = [&](int i) { return eval(*n.args[i], x, centre); };
  switch (n.kind) {
    case Kind::number:
      return n.value;
    case Kind::coord:
      return x[n.index];
    case Kind::radius:
      return norm(x - centre);
    case Kind::neg:
      return -arg(0);
    case Kind::add:
      return arg(0) + arg(1);
    case Kind::sub:
      return arg(0) - arg(1);
    case Kind::mul:
      return arg(0) * arg(1);
    case Kind::div:
      return arg(0) / arg(1);
    case Kind::pow:
      return std::pow(arg(0), arg(1));
    case Kind::call:
      break;
  }
  const std::string& f = n.fn;
  if (f == "abs") return std::abs(arg(0));
  if (f == "sqrt") return std::sqrt(arg(0));
  if (f == "exp") return std::exp(arg(0));
  if (f == "log") return std::log(arg(0));
  if (f == "sin") return std::sin(arg(0));
  if (f == "cos") return std::cos(arg(0));
  if (f == "tan") return std::tan(arg(0));
  if (f == "min") return std::min(arg(0), arg(1));
  if (f == "max") return std::max(arg(0), arg(1));
  return std::pow(arg(0), arg(1));
}

}  // namespace

Expression Expression::parse(const std::string& text, int dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("expression dimension must be 1..3");
  Expression e;
  e.root_ = Parser(text, dim).parse();
  e.text_ = text;
  return e;
}

double Expression::operator()(const Vec& x) const { return eval(*root_, x, centre_); }

}  // namespace potlab
