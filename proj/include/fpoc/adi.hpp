#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fpoc {

/// Row-major layout of a dense tensor on a structured grid (last axis
/// fastest). A "line" along axis a is the set of nodes that differ only in
/// their a-th index.
class TensorLayout {
 public:
  TensorLayout() = default;
  explicit TensorLayout(std::vector<std::size_t> extents);

  std::size_t rank() const { return extents_.size(); }
  std::size_t extent(std::size_t axis) const { return extents_[axis]; }
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }
  std::size_t size() const { return size_; }
  const std::vector<std::size_t>& extents() const { return extents_; }

  std::size_t line_count(std::size_t axis) const { return size_ / extents_[axis]; }
  /// Flat offset of the first node of line `line` along `axis`.
  std::size_t line_start(std::size_t axis, std::size_t line) const;

 private:
  std::vector<std::size_t> extents_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Trapezoidal weights h, ..., h with h/2 at both ends.
std::vector<double> trapezoid_weights(std::size_t n, double h);

/// Supplies the Chang-Cooper face coefficients of every line. For a line of
/// n nodes, `right` and `left` have n - 1 entries; the flux through the face
/// between nodes i and i + 1 is right[i] f[i+1] - left[i] f[i]. Both
/// boundary faces carry zero flux.
using CoefficientFill = std::function<void(std::size_t axis, std::size_t line,
                                           std::span<double> right, std::span<double> left)>;

/// Supplies the tridiagonal rows of a one-directional operator on a line:
/// (A x)_i = sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]. Used for operators
/// that are not in conservative flux form.
using RowFill = std::function<void(std::size_t axis, std::size_t line, std::span<double> sub,
                                   std::span<double> diag, std::span<double> sup)>;

/// Receives dJ/d(right) and dJ/d(left) for every face of a line during a
/// reverse sweep.
using FaceAdjointSink = std::function<void(std::size_t axis, std::size_t line,
                                           std::span<const double> right_bar,
                                           std::span<const double> left_bar)>;

/// Four-step Douglas-Gunn ADI integrator for df/dt = sum_a A_a f + s, where
/// A_a is the one-directional conservative Chang-Cooper operator
///   (A_a f)_i = (H_{i+1/2} - H_{i-1/2}) / w_i
/// and w_i are the trapezoid weights of axis a. One step of size dt is
///   v_0 = f + dt (sum_a A_a f + s)
///   (I - dt/2 A_a) v_a = v_{a-1} - dt/2 A_a f,   a = 1..rank
///   f_new = v_rank.
/// Every A_a has zero weighted column sums, so the trapezoidal mass is
/// preserved by each stage.
class DouglasGunnStepper {
 public:
  DouglasGunnStepper(TensorLayout layout, std::vector<double> spacing);

  const TensorLayout& layout() const { return layout_; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  std::span<const double> weights(std::size_t axis) const { return weights_[axis]; }

  /// out = A_axis in
  void apply(std::size_t axis, const RowFill& rows, std::span<const double> in,
             std::span<double> out) const;
  /// out = A_axis^T in
  void apply_transpose(std::size_t axis, const RowFill& rows, std::span<const double> in,
                       std::span<double> out) const;
  /// Solves (I - factor A_axis) out = rhs line by line. Throws
  /// SingularOperator naming the axis and line on pivot breakdown.
  void solve(std::size_t axis, const RowFill& rows, double factor, std::span<const double> rhs,
             std::span<double> out) const;
  void solve_transpose(std::size_t axis, const RowFill& rows, double factor,
                       std::span<const double> rhs, std::span<double> out) const;

  /// One Douglas-Gunn step. `source` may be empty.
  std::vector<double> step(const CoefficientFill& fill, std::span<const double> f, double dt,
                           std::span<const double> source = {}) const;
  /// Same scheme for operators given by rows.
  std::vector<double> step(const RowFill& rows, std::span<const double> f, double dt,
                           std::span<const double> source = {}) const;

  /// Rows of the conservative operator built from face coefficients.
  RowFill rows_from_faces(const CoefficientFill& fill) const;

  /// Reverse (adjoint) sweep through step(): given dJ/df_new, returns dJ/df
  /// and reports dJ/d(face coefficients) to `sink`.
  std::vector<double> step_reverse(const CoefficientFill& fill, std::span<const double> f,
                                   std::span<const double> out_bar, double dt,
                                   const FaceAdjointSink& sink) const;

 private:
  template <class LineFn>
  void for_each_line(std::size_t axis, LineFn&& fn) const;

  TensorLayout layout_;
  std::vector<double> spacing_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace fpoc
