// Residual reports: every verification sweep reduces to one of these.
#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "conglab/expr.hpp"

namespace conglab {

struct ResidualReport {
  std::string name;
  double max_abs = 0.0;
  double mean_abs = 0.0;
  RPoint argmax_point;
  std::vector<int> argmax_indices;  // (i,j,...) of the worst term, when indexed
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  bool vacuous = false;
  double wall_ms = 0.0;

  bool pass(double tol) const { return vacuous || max_abs <= tol; }
};

// Sequential accumulator (deterministic regardless of sweep parallelism when
// fed in index order).
class ResidualStats {
 public:
  void add(double value, std::span<const double> point, std::span<const int> indices = {});
  void skip() { ++skipped_; }

  ResidualReport finish(std::string name) const;

  double max_abs() const noexcept { return max_abs_; }
  std::size_t evaluated() const noexcept { return evaluated_; }
  std::size_t skipped() const noexcept { return skipped_; }

 private:
  double max_abs_ = 0.0;
  double sum_abs_ = 0.0;
  std::size_t evaluated_ = 0;
  std::size_t skipped_ = 0;
  RPoint argmax_point_;
  std::vector<int> argmax_indices_;
};

}  // namespace conglab
