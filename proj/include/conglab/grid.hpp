// Rectangular tensor grids over the coordinate box.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "conglab/error.hpp"
#include "conglab/expr.hpp"

namespace conglab {

struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  int count = 3;

  double spacing() const { return (max - min) / (count - 1); }
  double coord(int i) const {
    return min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
};

class Grid {
 public:
  explicit Grid(std::vector<GridAxis> axes);

  int dim() const noexcept { return static_cast<int>(axes_.size()); }
  std::size_t size() const noexcept { return size_; }
  const GridAxis& axis(int k) const { return axes_[static_cast<std::size_t>(k)]; }
  double spacing(int k) const { return axes_[static_cast<std::size_t>(k)].spacing(); }

  // Row-major layout, axis 0 slowest.
  std::size_t stride(int k) const { return strides_[static_cast<std::size_t>(k)]; }
  std::size_t flat_index(std::span<const int> idx) const;
  void unflatten(std::size_t flat, std::span<int> out) const;

  RPoint point(std::span<const int> idx) const;
  RPoint point_flat(std::size_t flat) const;
  void fill_point(std::span<const int> idx, std::span<double> out) const;

  std::vector<int> center_index() const;
  bool interior(std::span<const int> idx, int margin = 1) const;

  // Locate an exact grid node (within rel_tol of spacing).
  std::optional<std::vector<int>> locate(std::span<const double> p, double rel_tol = 1e-9) const;

  double diameter() const;

 private:
  std::vector<GridAxis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

// Convenience constructor: box [min_i, max_i] with `count_i` nodes per axis.
Grid make_grid(std::span<const double> min, std::span<const double> max,
               std::span<const int> count);
Grid make_grid(std::initializer_list<double> min, std::initializer_list<double> max,
               std::initializer_list<int> count);

}  // namespace conglab
