#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "fpoc/adi.hpp"
#include "fpoc/model.hpp"

namespace fpoc {

/// Uniform vertex-centred tensor grid on a box in R^4. Node i of axis a sits
/// at lower(a) + i h; all axes share the same spacing h.
class Grid4D {
 public:
  Grid4D() = default;
  Grid4D(double lower, double upper, std::size_t points);
  Grid4D(const std::array<double, kDim>& lower, const std::array<double, kDim>& upper,
         const std::array<std::size_t, kDim>& points);

  double lower(std::size_t axis) const { return lower_[axis]; }
  double upper(std::size_t axis) const { return upper_[axis]; }
  std::size_t points(std::size_t axis) const { return points_[axis]; }
  const std::array<std::size_t, kDim>& points() const { return points_; }
  double h() const { return h_; }
  std::size_t size() const { return layout_.size(); }
  const TensorLayout& layout() const { return layout_; }

  double node(std::size_t axis, std::size_t i) const {
    return lower_[axis] + h_ * static_cast<double>(i);
  }
  std::span<const double> weights(std::size_t axis) const { return weights_[axis]; }

  std::size_t index(const std::array<std::size_t, kDim>& ijkl) const;
  std::array<std::size_t, kDim> unravel(std::size_t index) const;
  State node_state(std::size_t index) const;
  /// Product trapezoid weight of a node.
  double weight(std::size_t index) const;

  bool contains(const State& x) const;
  bool operator==(const Grid4D& other) const;

 private:
  std::array<double, kDim> lower_{}, upper_{};
  std::array<std::size_t, kDim> points_{};
  double h_ = 0;
  TensorLayout layout_;
  std::array<std::vector<double>, kDim> weights_;
};

/// One value per grid node, flat in Grid4D::index order.
using Snapshot = std::vector<double>;

/// Trapezoidal quadrature of f over the box.
double total_mass(const Grid4D& grid, std::span<const double> f);
/// Trapezoidal weighted L2 norm.
double l2_norm(const Grid4D& grid, std::span<const double> f);
/// Marginal density along one axis (other axes integrated out).
std::vector<double> marginal(const Grid4D& grid, std::span<const double> f, std::size_t axis);
/// Expectation of each coordinate. Throws DiagnosticsError when the mass
/// deviates from one by more than 1e-6.
State mean_state(const Grid4D& grid, std::span<const double> f);

}  // namespace fpoc
