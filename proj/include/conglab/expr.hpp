// Symbolic scalar expressions over a fixed coordinate tuple: parsing, exact
// partial differentiation, pointwise evaluation, printing.  Trees are
// immutable and cheap to share; derivatives are cached per (node, axis).
#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conglab/error.hpp"

namespace conglab {

using RPoint = std::vector<double>;

// Shared, immutable coordinate-name list.  Rejects names that collide with
// the built-in function names (sin, cos, exp, log, sqrt).
using Coords = std::shared_ptr<const std::vector<std::string>>;
Coords make_coords(std::vector<std::string> names);

namespace detail {
struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;
}  // namespace detail

class Expr {
 public:
  Expr();  // literal 0

  static Expr parse(std::string_view source, const Coords& coords);
  static Expr number(double value);
  static Expr variable(int axis, const Coords& coords);

  // Exact symbolic partial derivative along coordinate `axis`; cached.
  Expr derivative(int axis) const;

  double eval(std::span<const double> point) const;
  double operator()(std::span<const double> point) const { return eval(point); }

  std::string str() const;

  const Coords& coords() const noexcept { return coords_; }
  int dim() const noexcept;

  bool is_literal() const noexcept;
  bool is_zero() const noexcept;
  double literal_value() const;  // requires is_literal()

  Expr operator-() const;
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr pow(const Expr& base, const Expr& exponent);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr log(const Expr& a);
  friend Expr sqrt(const Expr& a);

  friend Expr operator+(const Expr& a, double b) { return a + Expr::number(b); }
  friend Expr operator+(double a, const Expr& b) { return Expr::number(a) + b; }
  friend Expr operator-(const Expr& a, double b) { return a - Expr::number(b); }
  friend Expr operator-(double a, const Expr& b) { return Expr::number(a) - b; }
  friend Expr operator*(const Expr& a, double b) { return a * Expr::number(b); }
  friend Expr operator*(double a, const Expr& b) { return Expr::number(a) * b; }
  friend Expr operator/(const Expr& a, double b) { return a / Expr::number(b); }
  friend Expr operator/(double a, const Expr& b) { return Expr::number(a) / b; }
  friend Expr pow(const Expr& base, double e) { return pow(base, Expr::number(e)); }

 private:
  Expr(detail::NodePtr node, Coords coords);

  detail::NodePtr node_;
  Coords coords_;  // null for pure literals
};

}  // namespace conglab
