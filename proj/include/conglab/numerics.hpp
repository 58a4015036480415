// Finite-difference stencils and quadrature shared across modules.
#pragma once

#include <functional>
#include <span>

#include "conglab/expr.hpp"
#include "conglab/grid.hpp"

namespace conglab {

enum class FdOrder { Second = 2, Fourth = 4 };

// First derivative of samples along a grid line: sample(i) for i in [0, count).
// Uses central stencils in the interior and one-sided stencils of the same
// order at the edges.
double fd_line_derivative(const std::function<double(int)>& sample, int idx, int count, double h,
                          FdOrder order);

// Finite-difference partial derivative of an expression at a point (test
// oracle duty; central stencil only).
double fd_derivative(const Expr& e, const RPoint& p, int axis, double step,
                     FdOrder order = FdOrder::Fourth);

// Composite Simpson integral of `f` over [a, b] split into `steps` panels.
double simpson(const std::function<double(double)>& f, double a, double b, int steps = 1);

// Field indexed by flat grid position; axis derivative along grid lines.
class FieldView {
 public:
  FieldView(const Grid& grid, std::span<const double> values, int components = 1)
      : grid_(&grid), values_(values), components_(components) {}

  double value(std::size_t flat, int comp = 0) const {
    return values_[flat * static_cast<std::size_t>(components_) + static_cast<std::size_t>(comp)];
  }

  // d/dR^axis of component `comp` at multi-index `idx`.
  double axis_derivative(std::span<const int> idx, int axis, FdOrder order, int comp = 0) const;

 private:
  const Grid* grid_;
  std::span<const double> values_;
  int components_;
};

}  // namespace conglab
