#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "fpoc/adi.hpp"
#include "fpoc/grid.hpp"
#include "fpoc/model.hpp"

namespace fpoc {

/// Time discretisation of the forward problem. Each of the `steps`
/// control intervals is advanced by `substeps` Douglas-Gunn steps whose
/// doses are the piecewise-linear schedule sampled at the sub-step start.
struct TimeSpec {
  double final_time = 10.0;
  std::size_t steps = 200;
  std::size_t substeps = 1;

  double dt() const { return final_time / static_cast<double>(steps); }
  void validate() const;
};

/// Per-step runtime diagnostics of a forward solve.
struct ForwardDiagnostics {
  std::vector<double> mass;
  std::vector<double> min_value;
  std::vector<double> l2;
  /// Growth bound ||f0|| exp(||sigma^-1||^2 N^2 t) with N the largest drift
  /// magnitude on the grid.
  double envelope_rate = 0.0;
  bool envelope_exceeded = false;

  double max_mass_error() const;
  double min_density() const;
};

class FokkerPlanckSolver;

/// Space-time density history. Snapshots at multiples of the checkpoint
/// interval are held in memory; the rest are recomputed on demand.
class DensityField {
 public:
  using Advance = std::function<Snapshot(const Snapshot&, std::size_t m)>;

  DensityField(Grid4D grid, TimeSpec time, std::size_t checkpoint_every, Advance advance);

  const Grid4D& grid() const { return grid_; }
  const TimeSpec& time_spec() const { return time_; }
  std::size_t steps() const { return time_.steps; }
  double time(std::size_t m) const { return time_.dt() * static_cast<double>(m); }
  std::size_t checkpoint_every() const { return every_; }

  bool stored(std::size_t m) const { return m < stored_.size() && stored_[m].has_value(); }
  void store(std::size_t m, Snapshot f);
  /// Snapshot m, recomputed from the nearest earlier checkpoint when needed.
  Snapshot snapshot(std::size_t m) const;

  /// Visits m = 0..steps in order.
  void for_each(const std::function<void(std::size_t, const Snapshot&)>& fn) const;
  /// Visits m = steps..0, regenerating one checkpoint block at a time.
  void for_each_reverse(const std::function<void(std::size_t, const Snapshot&)>& fn) const;

  ForwardDiagnostics diagnostics;

 private:
  Grid4D grid_;
  TimeSpec time_;
  std::size_t every_;
  std::vector<std::optional<Snapshot>> stored_;
  Advance advance_;
};

/// Douglas-Gunn / Chang-Cooper discretisation of the controlled
/// Fokker-Planck equation on a Grid4D with zero-flux walls.
class FokkerPlanckSolver {
 public:
  FokkerPlanckSolver(Grid4D grid, NonDimParams params, DispersionModel dispersion, TimeSpec time);

  const Grid4D& grid() const { return grid_; }
  const NonDimParams& params() const { return params_; }
  const DispersionModel& dispersion() const { return dispersion_; }
  const TimeSpec& time_spec() const { return time_; }
  const DouglasGunnStepper& stepper() const { return stepper_; }

  /// Face coefficients of the spatial operator at frozen doses u.
  CoefficientFill coefficients(std::array<double, 2> u) const;

  /// One Douglas-Gunn step of size dt at frozen doses.
  Snapshot step(const Snapshot& f, std::array<double, 2> u, double dt) const;

  /// Advances one control interval [t_m, t_{m+1}] (all sub-steps).
  Snapshot advance(const Snapshot& f, const ControlSchedule& u, std::size_t m) const;

  /// Reverse of advance(): maps dJ/df_{m+1} to dJ/df_m and accumulates
  /// dJ/du at samples m and m + 1 into `u_bar` (indexed [channel][sample]).
  Snapshot advance_reverse(const Snapshot& f_m, const ControlSchedule& u, std::size_t m,
                           const Snapshot& out_bar,
                           std::array<std::vector<double>, 2>* u_bar) const;

  /// Full forward history. `checkpoint_every` = 1 stores every snapshot.
  DensityField solve_forward(const Snapshot& f0, const ControlSchedule& u,
                             std::size_t checkpoint_every = 1) const;

  /// Largest |F_j| over grid nodes, axes and the four dose corners of the box.
  double max_drift(const ControlSchedule& u) const;

 private:
  double sub_dt() const { return time_.dt() / static_cast<double>(time_.substeps); }
  std::array<double, 2> substep_control(const ControlSchedule& u, std::size_t m,
                                        std::size_t s) const;

  Grid4D grid_;
  NonDimParams params_;
  DispersionModel dispersion_;
  TimeSpec time_;
  DouglasGunnStepper stepper_;
  struct Faces;
  std::shared_ptr<const Faces> faces_;
};

}  // namespace fpoc
