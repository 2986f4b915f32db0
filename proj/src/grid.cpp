#include "fpoc/grid.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

Grid4D::Grid4D(double lower, double upper, std::size_t points)
    : Grid4D({lower, lower, lower, lower}, {upper, upper, upper, upper},
             {points, points, points, points}) {}

Grid4D::Grid4D(const std::array<double, kDim>& lower, const std::array<double, kDim>& upper,
               const std::array<std::size_t, kDim>& points)
    : lower_(lower), upper_(upper), points_(points) {
  for (std::size_t a = 0; a < kDim; ++a) {
    if (points_[a] < 3) throw InvalidInput(fmt::format("axis {} needs at least 3 points", a));
    if (!(upper_[a] > lower_[a])) throw InvalidInput(fmt::format("axis {} has an empty range", a));
  }
  h_ = (upper_[0] - lower_[0]) / static_cast<double>(points_[0] - 1);
  for (std::size_t a = 1; a < kDim; ++a) {
    const double ha = (upper_[a] - lower_[a]) / static_cast<double>(points_[a] - 1);
    if (std::abs(ha - h_) > 1e-12 * h_) {
      throw InvalidInput(fmt::format("axis {} spacing {} differs from axis 0 spacing {}", a, ha, h_));
    }
  }
  layout_ = TensorLayout({points_[0], points_[1], points_[2], points_[3]});
  for (std::size_t a = 0; a < kDim; ++a) weights_[a] = trapezoid_weights(points_[a], h_);
}

std::size_t Grid4D::index(const std::array<std::size_t, kDim>& ijkl) const {
  std::size_t idx = 0;
  for (std::size_t a = 0; a < kDim; ++a) idx += ijkl[a] * layout_.stride(a);
  return idx;
}

std::array<std::size_t, kDim> Grid4D::unravel(std::size_t index) const {
  std::array<std::size_t, kDim> out{};
  for (std::size_t a = 0; a < kDim; ++a) {
    out[a] = index / layout_.stride(a);
    index %= layout_.stride(a);
  }
  return out;
}

State Grid4D::node_state(std::size_t index) const {
  const auto ijkl = unravel(index);
  State x;
  for (std::size_t a = 0; a < kDim; ++a) x[a] = node(a, ijkl[a]);
  return x;
}

double Grid4D::weight(std::size_t index) const {
  const auto ijkl = unravel(index);
  double w = 1.0;
  for (std::size_t a = 0; a < kDim; ++a) w *= weights_[a][ijkl[a]];
  return w;
}

bool Grid4D::contains(const State& x) const {
  for (std::size_t a = 0; a < kDim; ++a) {
    if (!(x[a] >= lower_[a] && x[a] <= upper_[a])) return false;
  }
  return true;
}

bool Grid4D::operator==(const Grid4D& other) const {
  return lower_ == other.lower_ && upper_ == other.upper_ && points_ == other.points_;
}

namespace {

/// Visits every node with its weight in index order, so sums are ordered.
template <class Fn>
void for_each_weighted(const Grid4D& grid, Fn&& fn) {
  const auto& w0 = grid.weights(0);
  const auto& w1 = grid.weights(1);
  const auto& w2 = grid.weights(2);
  const auto& w3 = grid.weights(3);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < w0.size(); ++i)
    for (std::size_t j = 0; j < w1.size(); ++j)
      for (std::size_t k = 0; k < w2.size(); ++k)
        for (std::size_t l = 0; l < w3.size(); ++l, ++idx)
          fn(idx, std::array<std::size_t, kDim>{i, j, k, l}, w0[i] * w1[j] * w2[k] * w3[l]);
}

void check_size(const Grid4D& grid, std::span<const double> f) {
  if (f.size() != grid.size()) {
    throw InvalidInput(fmt::format("snapshot has {} values, grid has {} nodes", f.size(), grid.size()));
  }
}

}  // namespace

double total_mass(const Grid4D& grid, std::span<const double> f) {
  check_size(grid, f);
  double mass = 0.0;
  for_each_weighted(grid, [&](std::size_t idx, const auto&, double w) { mass += w * f[idx]; });
  return mass;
}

double l2_norm(const Grid4D& grid, std::span<const double> f) {
  check_size(grid, f);
  double acc = 0.0;
  for_each_weighted(grid, [&](std::size_t idx, const auto&, double w) { acc += w * f[idx] * f[idx]; });
  return std::sqrt(acc);
}

std::vector<double> marginal(const Grid4D& grid, std::span<const double> f, std::size_t axis) {
  check_size(grid, f);
  std::vector<double> out(grid.points(axis), 0.0);
  const auto& wa = grid.weights(axis);
  for_each_weighted(grid, [&](std::size_t idx, const auto& ijkl, double w) {
    out[ijkl[axis]] += w / wa[ijkl[axis]] * f[idx];
  });
  return out;
}

State mean_state(const Grid4D& grid, std::span<const double> f) {
  check_size(grid, f);
  double mass = 0.0;
  State acc;
  for_each_weighted(grid, [&](std::size_t idx, const auto& ijkl, double w) {
    const double wf = w * f[idx];
    mass += wf;
    for (std::size_t a = 0; a < kDim; ++a) acc[a] += wf * grid.node(a, ijkl[a]);
  });
  if (std::abs(mass - 1.0) > 1e-6) {
    throw DiagnosticsError(fmt::format("mean_state: density mass {} deviates from 1", mass));
  }
  return acc;
}

}  // namespace fpoc
