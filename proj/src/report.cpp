#include "conglab/report.hpp"

#include <cmath>

namespace conglab {

void ResidualStats::add(double value, std::span<const double> point,
                        std::span<const int> indices) {
  double a = std::abs(value);
  ++evaluated_;
  sum_abs_ += a;
  if (a > max_abs_ || evaluated_ == 1) {
    max_abs_ = a;
    argmax_point_.assign(point.begin(), point.end());
    argmax_indices_.assign(indices.begin(), indices.end());
  }
}

ResidualReport ResidualStats::finish(std::string name) const {
  ResidualReport r;
  r.name = std::move(name);
  r.max_abs = max_abs_;
  r.mean_abs = evaluated_ ? sum_abs_ / static_cast<double>(evaluated_) : 0.0;
  r.argmax_point = argmax_point_;
  r.argmax_indices = argmax_indices_;
  r.evaluated = evaluated_;
  r.skipped = skipped_;
  return r;
}

}  // namespace conglab
