#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fpoc/grid.hpp"
#include "fpoc/ode.hpp"

namespace fpoc {

/// Product of four truncated 1D Gaussians, each normalised so that its
/// trapezoid sum over the axis is one.
struct GaussianBump {
  State center;
  std::array<std::vector<double>, kDim> factor;

  Snapshot evaluate(const Grid4D& grid) const;
};

GaussianBump make_bump(const Grid4D& grid, const State& center, double variance);

/// Unit-mass isotropic Gaussian on the grid, truncated to the box.
Snapshot gaussian_density(const Grid4D& grid, const State& center, double variance);

/// Desired density f*(x, t_m) on the forward solver's time grid. Snapshots
/// are linear blends of the two bracketing anchor Gaussians, renormalised.
/// Only the anchor factors are stored; snapshots are built on request.
class TargetDensity {
 public:
  TargetDensity(Grid4D grid, double final_time, std::size_t steps, std::vector<double> anchor_times,
                std::vector<GaussianBump> anchors);

  const Grid4D& grid() const { return grid_; }
  std::size_t steps() const { return steps_; }
  double final_time() const { return final_time_; }
  double time(std::size_t m) const;
  const std::vector<double>& anchor_times() const { return anchor_times_; }
  const std::vector<GaussianBump>& anchors() const { return anchors_; }

  Snapshot snapshot(std::size_t m) const;
  /// Marginal of snapshot m along one axis.
  std::vector<double> marginal(std::size_t m, std::size_t axis) const;

 private:
  Grid4D grid_;
  double final_time_;
  std::size_t steps_;
  std::vector<double> anchor_times_;
  std::vector<GaussianBump> anchors_;
};

/// Places `n_anchors` Gaussians at uniformly spaced times on [0, final_time]
/// centred on the trajectory. Throws InvalidInput naming the anchor whose
/// centre lies outside the grid box.
TargetDensity build_target(const Trajectory& traj, std::size_t n_anchors, double variance,
                           const Grid4D& grid, double final_time, std::size_t steps);

/// CSV with columns t, axis, x, density for every `every`-th time step.
void write_target_marginals(const TargetDensity& target, const std::string& path,
                            std::size_t every = 1);

}  // namespace fpoc
