#include "fpoc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

namespace {

using ControlFn = std::function<std::array<double, 2>(double)>;

State axpy(const State& x, double a, const Vec4& k) {
  State out = x;
  for (std::size_t i = 0; i < kDim; ++i) out[i] += a * k[i];
  return out;
}

Trajectory run_rk4(const State& x0, const ControlFn& control, const NonDimParams& q, double t_end,
                   std::size_t steps) {
  if (steps < 1) throw InvalidInput("integrate: steps must be >= 1");
  if (!(t_end > 0.0)) throw InvalidInput("integrate: t_end must be positive");
  for (double v : x0.x) {
    if (!(v >= 0.0)) throw InvalidInput("integrate: initial state must be non-negative");
  }

  const double h = t_end / static_cast<double>(steps);
  Trajectory traj;
  traj.time.reserve(steps + 1);
  traj.state.reserve(steps + 1);
  traj.time.push_back(0.0);
  traj.state.push_back(x0);

  State x = x0;
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = h * static_cast<double>(n);
    const auto u0 = control(t);
    const auto uh = control(t + 0.5 * h);
    const auto u1 = control(t + h);
    const Vec4 k1 = drift(x, u0, q);
    const Vec4 k2 = drift(axpy(x, 0.5 * h, k1), uh, q);
    const Vec4 k3 = drift(axpy(x, 0.5 * h, k2), uh, q);
    const Vec4 k4 = drift(axpy(x, h, k3), u1, q);
    const double t_next = h * static_cast<double>(n + 1);
    for (std::size_t i = 0; i < kDim; ++i) {
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x[i])) {
        throw DivergenceError(t_next, fmt::format("ODE state component {} became non-finite at t = {}",
                                                  i, t_next));
      }
      if (x[i] < 0.0) {
        if (traj.clip_events == 0) traj.first_clip_time = t_next;
        ++traj.clip_events;
        x[i] = 0.0;
      }
    }
    traj.time.push_back(t_next);
    traj.state.push_back(x);
  }
  return traj;
}

}  // namespace

State Trajectory::at(double t) const {
  if (time.empty()) throw InvalidInput("empty trajectory");
  if (t <= time.front()) return state.front();
  if (t >= time.back()) return state.back();
  const auto it = std::upper_bound(time.begin(), time.end(), t);
  const auto hi = static_cast<std::size_t>(it - time.begin());
  const std::size_t lo = hi - 1;
  const double lambda = (t - time[lo]) / (time[hi] - time[lo]);
  State out;
  for (std::size_t i = 0; i < kDim; ++i) {
    out[i] = (1.0 - lambda) * state[lo][i] + lambda * state[hi][i];
  }
  return out;
}

Trajectory integrate(const State& x0, const ControlSchedule& u, const NonDimParams& q,
                     double t_end, std::size_t steps) {
  return run_rk4(x0, [&u](double t) { return u.at(t); }, q, t_end, steps);
}

Trajectory integrate_untreated(const State& x0, const NonDimParams& q, double t_end,
                               std::size_t steps) {
  return run_rk4(x0, [](double) { return std::array<double, 2>{0.0, 0.0}; }, q, t_end, steps);
}

}  // namespace fpoc
