#pragma once

// Manufactured solution for the two-dimensional restriction of the
// Douglas-Gunn / Chang-Cooper scheme on [0, 1]^2 with zero-flux walls.
//
//   f(x, y, t) = 1 + 0.5 e^{-t} cos(pi x) cos(pi y)
//   F_x = 0.5 sin(pi x) (1 + 0.5 y),  F_y = 0.3 sin(pi y)
//   D_x = 0.05 (1 + x),               D_y = 0.05
//
// Both drifts vanish on the walls and f has zero normal derivative there,
// so the exact flux D f' - F f is zero on the boundary. The source term is
// s = f_t - div(D grad f - F f).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "fpoc/adi.hpp"
#include "fpoc/chang_cooper.hpp"

namespace mms {

inline constexpr double kPi = std::numbers::pi;

inline double exact(double x, double y, double t) {
  return 1.0 + 0.5 * std::exp(-t) * std::cos(kPi * x) * std::cos(kPi * y);
}

inline double drift_x(double x, double y) { return 0.5 * std::sin(kPi * x) * (1.0 + 0.5 * y); }
inline double drift_y(double, double y) { return 0.3 * std::sin(kPi * y); }
inline double diff_x(double x) { return 0.05 * (1.0 + x); }
inline double diff_y() { return 0.05; }

inline double source(double x, double y, double t) {
  const double E = std::exp(-t);
  const double cx = std::cos(kPi * x), sx = std::sin(kPi * x);
  const double cy = std::cos(kPi * y), sy = std::sin(kPi * y);
  const double f = exact(x, y, t);
  const double f_t = -0.5 * E * cx * cy;
  const double f_x = -0.5 * E * kPi * sx * cy;
  const double f_xx = -0.5 * E * kPi * kPi * cx * cy;
  const double f_y = -0.5 * E * kPi * cx * sy;
  const double f_yy = f_xx;
  const double Fx = drift_x(x, y), dFx = 0.5 * kPi * cx * (1.0 + 0.5 * y);
  const double Fy = drift_y(x, y), dFy = 0.3 * kPi * cy;
  const double dHx = 0.05 * f_x + diff_x(x) * f_xx - (dFx * f + Fx * f_x);
  const double dHy = diff_y() * f_yy - (dFy * f + Fy * f_y);
  return f_t - dHx - dHy;
}

/// L1 error at t = final_time for n nodes per axis and `steps` time steps.
inline double l1_error(std::size_t n, std::size_t steps, double final_time = 0.5) {
  const double h = 1.0 / static_cast<double>(n - 1);
  fpoc::TensorLayout layout({n, n});
  fpoc::DouglasGunnStepper stepper(layout, {h, h});
  auto node = [&](std::size_t i) { return h * static_cast<double>(i); };

  const fpoc::CoefficientFill fill = [&](std::size_t axis, std::size_t line,
                                         std::span<double> right, std::span<double> left) {
    const std::size_t start = layout.line_start(axis, line);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double face = node(i) + 0.5 * h;
      fpoc::FluxCoefficients c;
      if (axis == 0) {
        const double y = node(start % n);
        c = fpoc::flux_coefficients(drift_x(face, y), diff_x(face), h);
      } else {
        const double x = node(start / n);
        c = fpoc::flux_coefficients(drift_y(x, face), diff_y(), h);
      }
      right[i] = c.right;
      left[i] = c.left;
    }
  };

  std::vector<double> f(n * n), s(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) f[i * n + j] = exact(node(i), node(j), 0.0);

  const double dt = final_time / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * dt;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s[i * n + j] = source(node(i), node(j), t_mid);
    f = stepper.step(fill, f, dt, s);
  }

  const auto w = fpoc::trapezoid_weights(n, h);
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      err += w[i] * w[j] * std::abs(f[i * n + j] - exact(node(i), node(j), final_time));
  return err;
}

/// Observed orders between successive refinements (h and dt halved together).
inline std::vector<double> observed_orders(const std::vector<std::size_t>& nodes,
                                           std::vector<double>* errors = nullptr) {
  std::vector<double> e;
  for (std::size_t n : nodes) e.push_back(l1_error(n, n - 1));
  std::vector<double> p;
  for (std::size_t k = 1; k < e.size(); ++k) p.push_back(std::log2(e[k - 1] / e[k]));
  if (errors) *errors = e;
  return p;
}

}  // namespace mms
