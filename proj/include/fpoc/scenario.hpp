#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fpoc/adjoint.hpp"
#include "fpoc/fp_solver.hpp"
#include "fpoc/grid.hpp"
#include "fpoc/model.hpp"
#include "fpoc/optimizer.hpp"

namespace fpoc {

/// Grids above this many points per axis need an explicit opt-in.
inline constexpr std::size_t kDeskGridLimit = 21;

struct GridSpec {
  double lower = 0.0;
  double upper = 6.0;
  std::size_t points = 13;
};

struct PatientTriple {
  double d = 0.0;
  double l = 0.0;
  double s = 0.0;
};

struct TargetSpec {
  PatientTriple patient{2.1, 1.1, 1.25};
  std::size_t anchors = 20;
  double variance = 0.05;
  std::size_t ode_steps = 2000;
};

/// Dose bounds (non-dimensional) and the factors that turn doses into
/// mg/day and IU/l/day.
struct DoseSpec {
  double chemo_bound = 7.0;
  double immuno_bound = 0.072;
  double chemo_scale = 1.0;
  double immuno_scale = 1e7;
};

struct OracleSpec {
  std::size_t paths = 100000;
  std::size_t steps = 2000;
  bool noise_induced_drift = true;
};

struct GradcheckSpec {
  std::size_t directions = 5;
  double epsilon = 1e-4;
  double tolerance = 1e-3;
};

struct Scenario {
  std::string name;
  ScalingConstants scaling;
  /// Base model with the patient triple applied.
  NonDimParams params;
  PatientTriple patient;
  State initial_state;
  double initial_variance = 0.05;
  GridSpec grid;
  TimeSpec time{10.0, 20, 2};
  std::size_t checkpoint_every = 1;
  DispersionModel dispersion;
  ObjectiveWeights weights;
  DoseSpec doses;
  TargetSpec target;
  PncgConfig optimizer;
  OracleSpec oracle;
  GradcheckSpec gradcheck;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  Grid4D make_grid() const;
  /// Model parameters of the target patient.
  NonDimParams target_params() const;
};

/// Parses a scenario document (JSON with comments). Syntax errors report
/// the line; validation errors name the field. Missing base model
/// parameters are listed together.
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario(const std::string& path);

/// Dimensional dose series: u1 * chemo_scale (mg/day), u2 * immuno_scale (IU/l/day).
struct DimensionalDoses {
  std::vector<double> chemo;
  std::vector<double> immuno;
};
DimensionalDoses dimensionalize_controls(const ControlSchedule& u, const DoseSpec& doses);

}  // namespace fpoc
