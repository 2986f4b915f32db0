#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpoc/adjoint.hpp"
#include "fpoc/optimizer.hpp"
#include "fpoc/scenario.hpp"
#include "fpoc/target.hpp"

namespace fpoc {

/// Command-line overrides applied on top of a scenario.
struct RunOptions {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> checkpoint_every;
  bool full_scale = false;
};

/// Applies the overrides and enforces the desk-scale grid gate.
Scenario apply_options(Scenario s, const RunOptions& opt);

struct RunReport {
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  double max_mass_error = 0.0;
  double min_density = 0.0;
  bool envelope_exceeded = false;
  double total_chemo_mg = 0.0;
  double total_immuno_iu = 0.0;
  double peak_immuno_iu = 0.0;
  std::vector<double> time;
  std::vector<double> tumor_untreated;
  std::vector<double> tumor_treated;
  ControlSchedule controls;
};

/// Target construction, untreated solve, PNCG, treated solve. Writes
/// target_trajectory.csv, mean_untreated.csv, mean_treated.csv,
/// schedule.csv, trace.csv, diagnostics.csv and report.json.
RunReport run_pipeline(const Scenario& s);

struct ForwardReport {
  double max_mass_error = 0.0;
  double min_density = 0.0;
  bool envelope_exceeded = false;
  std::vector<State> mean;
};

/// Forward solve at the given doses (zero when absent). Writes mean.csv,
/// diagnostics.csv, marginals.csv and the final density as density_final.bin.
ForwardReport run_forward(const Scenario& s, const std::optional<ControlSchedule>& u);

struct OracleReport {
  std::vector<double> times;
  /// l1[k][axis] between the FP marginal and the path histogram.
  std::vector<std::array<double, kDim>> l1;

  double max_l1() const;
};

/// FP versus reflected Euler-Maruyama at zero dose, compared at T/2 and T.
/// Writes oracle_l1.csv, oracle_marginals.csv and ensemble_summary.csv.
OracleReport run_oracle(const Scenario& s);

/// Finite-difference audit of the adjoint gradient at a random interior
/// schedule. Writes gradcheck.txt.
GradientCheckReport run_gradcheck(const Scenario& s);

/// Writes target_trajectory.csv and target_marginals.csv.
TargetDensity run_target(const Scenario& s);

/// Shared set-up.
FokkerPlanckSolver make_solver(const Scenario& s);
Snapshot make_initial_density(const Scenario& s);
TargetDensity make_target(const Scenario& s, Trajectory* trajectory = nullptr);
ControlSchedule zero_schedule(const Scenario& s);

/// Trapezoidal integral of a uniformly sampled series.
double trapezoid(std::span<const double> v, double dt);

}  // namespace fpoc
