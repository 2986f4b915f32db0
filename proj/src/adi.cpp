#include "fpoc/adi.hpp"

#include <cmath>
#include <exception>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

TensorLayout::TensorLayout(std::vector<std::size_t> extents) : extents_(std::move(extents)) {
  if (extents_.empty()) throw InvalidInput("tensor layout needs at least one axis");
  strides_.assign(extents_.size(), 1);
  size_ = 1;
  for (std::size_t a = extents_.size(); a-- > 0;) {
    if (extents_[a] < 2) throw InvalidInput("every axis needs at least two nodes");
    strides_[a] = size_;
    size_ *= extents_[a];
  }
}

std::size_t TensorLayout::line_start(std::size_t axis, std::size_t line) const {
  const std::size_t inner = strides_[axis];
  const std::size_t outer = line / inner;
  return outer * extents_[axis] * inner + line % inner;
}

std::vector<double> trapezoid_weights(std::size_t n, double h) {
  std::vector<double> w(n, h);
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  return w;
}

namespace {

/// Per-thread scratch for one line.
struct LineScratch {
  std::vector<double> right, left, x, y, sub, diag, sup, work;

  explicit LineScratch(std::size_t n)
      : right(n - 1), left(n - 1), x(n), y(n), sub(n), diag(n), sup(n), work(n) {}
};

void gather(std::span<const double> src, std::size_t start, std::size_t stride, std::span<double> dst) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[start + i * stride];
}

void scatter(std::span<const double> src, std::size_t start, std::size_t stride, std::span<double> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[start + i * stride] = src[i];
}

/// Rows of A on one line: sub[i] multiplies x[i-1], sup[i] multiplies x[i+1].
void assemble(std::span<const double> right, std::span<const double> left,
              std::span<const double> w, std::span<double> sub, std::span<double> diag,
              std::span<double> sup) {
  const std::size_t n = w.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double out_right = i + 1 < n ? left[i] : 0.0;
    const double out_left = i > 0 ? right[i - 1] : 0.0;
    sub[i] = i > 0 ? left[i - 1] / w[i] : 0.0;
    sup[i] = i + 1 < n ? right[i] / w[i] : 0.0;
    diag[i] = -(out_right + out_left) / w[i];
  }
}

/// Replaces the rows by those of the transpose. `tmp` is scratch.
void transpose_rows(std::vector<double>& sub, std::vector<double>& sup, std::vector<double>& tmp) {
  const std::size_t n = sub.size();
  for (std::size_t i = 0; i < n; ++i) tmp[i] = i + 1 < n ? sub[i + 1] : 0.0;
  for (std::size_t i = n; i-- > 1;) sub[i] = sup[i - 1];
  sub[0] = 0.0;
  sup.swap(tmp);
}

/// Thomas algorithm for (I - factor A) x = y with A given by its rows.
/// Returns false when a pivot is not strictly positive.
bool thomas(double factor, const std::vector<double>& sub, const std::vector<double>& diag,
            const std::vector<double>& sup, std::span<const double> y, std::span<double> x,
            std::vector<double>& work) {
  const std::size_t n = y.size();
  double pivot = 1.0 - factor * diag[0];
  if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
  x[0] = y[0] / pivot;
  work[0] = -factor * sup[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    const double a = -factor * sub[i];
    pivot = (1.0 - factor * diag[i]) - a * work[i - 1];
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    work[i] = i + 1 < n ? -factor * sup[i] / pivot : 0.0;
    x[i] = (y[i] - a * x[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= work[i] * x[i + 1];
  return true;
}

}  // namespace

DouglasGunnStepper::DouglasGunnStepper(TensorLayout layout, std::vector<double> spacing)
    : layout_(std::move(layout)), spacing_(std::move(spacing)) {
  if (spacing_.size() != layout_.rank()) throw InvalidInput("one spacing per axis is required");
  for (std::size_t a = 0; a < layout_.rank(); ++a) {
    if (!(spacing_[a] > 0.0)) throw InvalidInput("grid spacing must be positive");
    weights_.push_back(trapezoid_weights(layout_.extent(a), spacing_[a]));
  }
}

template <class LineFn>
void DouglasGunnStepper::for_each_line(std::size_t axis, LineFn&& fn) const {
  const std::size_t lines = layout_.line_count(axis);
  const std::size_t n = layout_.extent(axis);
  std::exception_ptr failure;
#pragma omp parallel
  {
    LineScratch scratch(n);
#pragma omp for schedule(static)
    for (std::size_t line = 0; line < lines; ++line) {
      try {
        fn(line, scratch);
      } catch (...) {
#pragma omp critical(fpoc_line_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

RowFill DouglasGunnStepper::rows_from_faces(const CoefficientFill& fill) const {
  return [this, fill](std::size_t axis, std::size_t line, std::span<double> sub,
                      std::span<double> diag, std::span<double> sup) {
    thread_local std::vector<double> right, left;
    const auto w = weights(axis);
    right.resize(w.size() - 1);
    left.resize(w.size() - 1);
    fill(axis, line, right, left);
    assemble(right, left, w, sub, diag, sup);
  };
}

void DouglasGunnStepper::apply(std::size_t axis, const RowFill& rows, std::span<const double> in,
                               std::span<double> out) const {
  const std::size_t stride = layout_.stride(axis);
  for_each_line(axis, [&](std::size_t line, LineScratch& s) {
    const std::size_t start = layout_.line_start(axis, line);
    rows(axis, line, s.sub, s.diag, s.sup);
    gather(in, start, stride, s.x);
    const std::size_t n = s.x.size();
    for (std::size_t i = 0; i < n; ++i) {
      double v = s.diag[i] * s.x[i];
      if (i > 0) v += s.sub[i] * s.x[i - 1];
      if (i + 1 < n) v += s.sup[i] * s.x[i + 1];
      s.y[i] = v;
    }
    scatter(s.y, start, stride, out);
  });
}

void DouglasGunnStepper::apply_transpose(std::size_t axis, const RowFill& rows,
                                         std::span<const double> in, std::span<double> out) const {
  const std::size_t stride = layout_.stride(axis);
  for_each_line(axis, [&](std::size_t line, LineScratch& s) {
    const std::size_t start = layout_.line_start(axis, line);
    rows(axis, line, s.sub, s.diag, s.sup);
    transpose_rows(s.sub, s.sup, s.work);
    gather(in, start, stride, s.x);
    const std::size_t n = s.x.size();
    for (std::size_t i = 0; i < n; ++i) {
      double v = s.diag[i] * s.x[i];
      if (i > 0) v += s.sub[i] * s.x[i - 1];
      if (i + 1 < n) v += s.sup[i] * s.x[i + 1];
      s.y[i] = v;
    }
    scatter(s.y, start, stride, out);
  });
}

void DouglasGunnStepper::solve(std::size_t axis, const RowFill& rows, double factor,
                               std::span<const double> rhs, std::span<double> out) const {
  const std::size_t stride = layout_.stride(axis);
  for_each_line(axis, [&](std::size_t line, LineScratch& s) {
    const std::size_t start = layout_.line_start(axis, line);
    rows(axis, line, s.sub, s.diag, s.sup);
    gather(rhs, start, stride, s.y);
    if (!thomas(factor, s.sub, s.diag, s.sup, s.y, s.x, s.work)) {
      throw SingularOperator(static_cast<int>(axis), line,
                             fmt::format("tridiagonal breakdown on axis {} line {}", axis, line));
    }
    scatter(s.x, start, stride, out);
  });
}

void DouglasGunnStepper::solve_transpose(std::size_t axis, const RowFill& rows, double factor,
                                         std::span<const double> rhs,
                                         std::span<double> out) const {
  const std::size_t stride = layout_.stride(axis);
  for_each_line(axis, [&](std::size_t line, LineScratch& s) {
    const std::size_t start = layout_.line_start(axis, line);
    rows(axis, line, s.sub, s.diag, s.sup);
    transpose_rows(s.sub, s.sup, s.work);
    gather(rhs, start, stride, s.y);
    if (!thomas(factor, s.sub, s.diag, s.sup, s.y, s.x, s.work)) {
      throw SingularOperator(static_cast<int>(axis), line,
                             fmt::format("transposed tridiagonal breakdown on axis {} line {}",
                                         axis, line));
    }
    scatter(s.x, start, stride, out);
  });
}

std::vector<double> DouglasGunnStepper::step(const CoefficientFill& fill,
                                             std::span<const double> f, double dt,
                                             std::span<const double> source) const {
  return step(rows_from_faces(fill), f, dt, source);
}

std::vector<double> DouglasGunnStepper::step(const RowFill& fill, std::span<const double> f,
                                             double dt, std::span<const double> source) const {
  const std::size_t size = layout_.size();
  const std::size_t rank = layout_.rank();
  std::vector<std::vector<double>> Af(rank, std::vector<double>(size));
  for (std::size_t a = 0; a < rank; ++a) apply(a, fill, f, Af[a]);

  std::vector<double> v(f.begin(), f.end());
  for (std::size_t i = 0; i < size; ++i) {
    double acc = 0.0;
    for (std::size_t a = 0; a < rank; ++a) acc += Af[a][i];
    if (!source.empty()) acc += source[i];
    v[i] += dt * acc;
  }

  const double half = 0.5 * dt;
  std::vector<double> rhs(size);
  for (std::size_t a = 0; a < rank; ++a) {
    for (std::size_t i = 0; i < size; ++i) rhs[i] = v[i] - half * Af[a][i];
    solve(a, fill, half, rhs, v);
  }
  return v;
}

std::vector<double> DouglasGunnStepper::step_reverse(const CoefficientFill& fill,
                                                     std::span<const double> f,
                                                     std::span<const double> out_bar, double dt,
                                                     const FaceAdjointSink& sink) const {
  const RowFill rows = rows_from_faces(fill);
  const std::size_t size = layout_.size();
  const std::size_t rank = layout_.rank();
  const double half = 0.5 * dt;

  // Replay the forward stages.
  std::vector<std::vector<double>> Af(rank, std::vector<double>(size));
  for (std::size_t a = 0; a < rank; ++a) apply(a, rows, f, Af[a]);
  std::vector<std::vector<double>> stage(rank, std::vector<double>(size));
  {
    std::vector<double> v(f.begin(), f.end());
    for (std::size_t i = 0; i < size; ++i) {
      double acc = 0.0;
      for (std::size_t a = 0; a < rank; ++a) acc += Af[a][i];
      v[i] += dt * acc;
    }
    std::vector<double> rhs(size);
    for (std::size_t a = 0; a < rank; ++a) {
      for (std::size_t i = 0; i < size; ++i) rhs[i] = v[i] - half * Af[a][i];
      solve(a, rows, half, rhs, stage[a]);
      v = stage[a];
    }
  }

  // Adjoint of the corrections, last axis first.
  std::vector<std::vector<double>> b(rank, std::vector<double>(size));
  std::vector<double> f_bar(size, 0.0);
  std::vector<double> v_bar(out_bar.begin(), out_bar.end());
  std::vector<double> tmp(size);
  for (std::size_t a = rank; a-- > 0;) {
    solve_transpose(a, rows, half, v_bar, b[a]);
    apply_transpose(a, rows, b[a], tmp);
    for (std::size_t i = 0; i < size; ++i) f_bar[i] -= half * tmp[i];
    v_bar = b[a];
  }
  // v_bar is now the adjoint of the predictor output.
  for (std::size_t i = 0; i < size; ++i) f_bar[i] += v_bar[i];
  for (std::size_t a = 0; a < rank; ++a) {
    apply_transpose(a, rows, v_bar, tmp);
    for (std::size_t i = 0; i < size; ++i) f_bar[i] += dt * tmp[i];
  }

  if (sink) {
    // b^T A z = sum_faces H_f(z) (b_l / w_l - b_r / w_r) with
    // H_f = right_f z_r - left_f z_l. Two (b, z) pairs per axis:
    // (dt/2 b_a, v_a - f) from the correction and (dt v_bar, f) from the predictor.
    for (std::size_t a = 0; a < rank; ++a) {
      const std::size_t stride = layout_.stride(a);
      const auto w = weights(a);
      const std::size_t n = layout_.extent(a);
      for_each_line(a, [&](std::size_t line, LineScratch& s) {
        const std::size_t start = layout_.line_start(a, line);
        std::vector<double>& rbar = s.right;
        std::vector<double>& lbar = s.left;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const std::size_t l = start + i * stride;
          const std::size_t r = l + stride;
          const double s_corr = half * (b[a][l] / w[i] - b[a][r] / w[i + 1]);
          const double s_pred = dt * (v_bar[l] / w[i] - v_bar[r] / w[i + 1]);
          rbar[i] = s_corr * (stage[a][r] - f[r]) + s_pred * f[r];
          lbar[i] = -s_corr * (stage[a][l] - f[l]) - s_pred * f[l];
        }
        sink(a, line, rbar, lbar);
      });
    }
  }
  return f_bar;
}

}  // namespace fpoc
