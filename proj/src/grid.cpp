#include "conglab/grid.hpp"

#include <cmath>
#include <string>

namespace conglab {

Grid::Grid(std::vector<GridAxis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw ValidationError("grid needs at least one axis");
  size_ = 1;
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const GridAxis& a = axes_[k];
    if (a.count < 3)
      throw ValidationError("grid axis " + std::to_string(k) +
                            " needs at least 3 points, got " + std::to_string(a.count));
    if (!(a.min < a.max))
      throw ValidationError("grid axis " + std::to_string(k) + " needs min < max");
    size_ *= static_cast<std::size_t>(a.count);
  }
  strides_.assign(axes_.size(), 1);
  for (int k = static_cast<int>(axes_.size()) - 2; k >= 0; --k)
    strides_[static_cast<std::size_t>(k)] =
        strides_[static_cast<std::size_t>(k) + 1] *
        static_cast<std::size_t>(axes_[static_cast<std::size_t>(k) + 1].count);
}

std::size_t Grid::flat_index(std::span<const int> idx) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < axes_.size(); ++k)
    flat += static_cast<std::size_t>(idx[k]) * strides_[k];
  return flat;
}

void Grid::unflatten(std::size_t flat, std::span<int> out) const {
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    out[k] = static_cast<int>(flat / strides_[k]);
    flat %= strides_[k];
  }
}

RPoint Grid::point(std::span<const int> idx) const {
  RPoint p(axes_.size());
  fill_point(idx, p);
  return p;
}

void Grid::fill_point(std::span<const int> idx, std::span<double> out) const {
  for (std::size_t k = 0; k < axes_.size(); ++k) out[k] = axes_[k].coord(idx[k]);
}

RPoint Grid::point_flat(std::size_t flat) const {
  std::vector<int> idx(axes_.size());
  unflatten(flat, idx);
  return point(idx);
}

std::vector<int> Grid::center_index() const {
  std::vector<int> idx(axes_.size());
  for (std::size_t k = 0; k < axes_.size(); ++k) idx[k] = axes_[k].count / 2;
  return idx;
}

bool Grid::interior(std::span<const int> idx, int margin) const {
  for (std::size_t k = 0; k < axes_.size(); ++k)
    if (idx[k] < margin || idx[k] > axes_[k].count - 1 - margin) return false;
  return true;
}

std::optional<std::vector<int>> Grid::locate(std::span<const double> p, double rel_tol) const {
  if (p.size() != axes_.size()) return std::nullopt;
  std::vector<int> idx(axes_.size());
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const GridAxis& a = axes_[k];
    double t = (p[k] - a.min) / a.spacing();
    int i = static_cast<int>(std::llround(t));
    if (i < 0 || i >= a.count) return std::nullopt;
    if (std::abs(t - static_cast<double>(i)) > rel_tol * std::max(1.0, std::abs(t)) + rel_tol)
      return std::nullopt;
    idx[k] = i;
  }
  return idx;
}

double Grid::diameter() const {
  double d2 = 0.0;
  for (const GridAxis& a : axes_) d2 += (a.max - a.min) * (a.max - a.min);
  return std::sqrt(d2);
}

Grid make_grid(std::span<const double> min, std::span<const double> max,
               std::span<const int> count) {
  if (min.size() != max.size() || min.size() != count.size())
    throw ValidationError("grid min/max/points length mismatch");
  std::vector<GridAxis> axes(min.size());
  for (std::size_t k = 0; k < min.size(); ++k) axes[k] = {min[k], max[k], count[k]};
  return Grid(std::move(axes));
}

Grid make_grid(std::initializer_list<double> min, std::initializer_list<double> max,
               std::initializer_list<int> count) {
  return make_grid(std::span<const double>(min.begin(), min.size()),
                   std::span<const double>(max.begin(), max.size()),
                   std::span<const int>(count.begin(), count.size()));
}

}  // namespace conglab
