#pragma once

#include <cstddef>
#include <vector>

#include "fpoc/model.hpp"

namespace fpoc {

/// Deterministic path of the non-dimensional model on a uniform time grid.
struct Trajectory {
  std::vector<double> time;
  std::vector<State> state;
  /// Number of component clips to zero performed during integration.
  std::size_t clip_events = 0;
  double first_clip_time = 0.0;

  /// Linear interpolation between samples; t is clamped to the horizon.
  State at(double t) const;
};

/// Classical fourth-order Runge-Kutta with `steps` uniform steps over
/// [0, t_end]. Negative components are clipped to zero after each step and
/// counted in the returned trajectory. Throws DivergenceError on a non-finite
/// state.
Trajectory integrate(const State& x0, const ControlSchedule& u, const NonDimParams& q,
                     double t_end, std::size_t steps);

/// Same as integrate() with both doses held at zero.
Trajectory integrate_untreated(const State& x0, const NonDimParams& q, double t_end,
                               std::size_t steps);

}  // namespace fpoc
