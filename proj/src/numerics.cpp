#include "conglab/numerics.hpp"

#include <cmath>
#include <vector>

namespace conglab {

double fd_line_derivative(const std::function<double(int)>& f, int idx, int count, double h,
                          FdOrder order) {
  if (order == FdOrder::Second) {
    if (count < 3) throw ValidationError("second-order stencil needs 3 samples");
    if (idx >= 1 && idx <= count - 2) return (f(idx + 1) - f(idx - 1)) / (2.0 * h);
    if (idx == 0) return (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
    return (3.0 * f(count - 1) - 4.0 * f(count - 2) + f(count - 3)) / (2.0 * h);
  }
  if (count < 5) throw ValidationError("fourth-order stencil needs 5 samples");
  if (idx >= 2 && idx <= count - 3)
    return (f(idx - 2) - 8.0 * f(idx - 1) + 8.0 * f(idx + 1) - f(idx + 2)) / (12.0 * h);
  if (idx == 0)
    return (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) / (12.0 * h);
  if (idx == 1)
    return (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) / (12.0 * h);
  if (idx == count - 2) {
    int m = count - 1;
    return -(-3.0 * f(m) - 10.0 * f(m - 1) + 18.0 * f(m - 2) - 6.0 * f(m - 3) + f(m - 4)) /
           (12.0 * h);
  }
  int m = count - 1;
  return -(-25.0 * f(m) + 48.0 * f(m - 1) - 36.0 * f(m - 2) + 16.0 * f(m - 3) - 3.0 * f(m - 4)) /
         (12.0 * h);
}

double fd_derivative(const Expr& e, const RPoint& p, int axis, double step, FdOrder order) {
  RPoint q = p;
  auto at = [&](double x) {
    q[static_cast<std::size_t>(axis)] = x;
    return e.eval(q);
  };
  double x0 = p[static_cast<std::size_t>(axis)];
  if (order == FdOrder::Second) return (at(x0 + step) - at(x0 - step)) / (2.0 * step);
  return (at(x0 - 2.0 * step) - 8.0 * at(x0 - step) + 8.0 * at(x0 + step) - at(x0 + 2.0 * step)) /
         (12.0 * step);
}

double simpson(const std::function<double(double)>& f, double a, double b, int steps) {
  if (steps < 1) steps = 1;
  double h = (b - a) / steps;
  double sum = 0.0;
  for (int s = 0; s < steps; ++s) {
    double x0 = a + s * h;
    double x1 = x0 + h;
    sum += (h / 6.0) * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
  }
  return sum;
}

double FieldView::axis_derivative(std::span<const int> idx, int axis, FdOrder order,
                                  int comp) const {
  const Grid& g = *grid_;
  std::size_t base = g.flat_index(idx);
  std::size_t stride = g.stride(axis);
  int i0 = idx[static_cast<std::size_t>(axis)];
  std::size_t line_start = base - static_cast<std::size_t>(i0) * stride;
  auto sample = [&](int i) {
    return value(line_start + static_cast<std::size_t>(i) * stride, comp);
  };
  return fd_line_derivative(sample, i0, g.axis(axis).count, g.spacing(axis), order);
}

}  // namespace conglab
