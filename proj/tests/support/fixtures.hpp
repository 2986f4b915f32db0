#pragma once

#include <string>

#include "fpoc/model.hpp"
#include "fpoc/scenario.hpp"

namespace fixtures {

inline std::string scenario_path(const std::string& name) {
  return std::string(FPOC_SOURCE_DIR) + "/scenarios/" + name;
}

/// Parameters with every coupling switched off; k = 1 keeps T/(k+T) finite.
inline fpoc::NonDimParams quiet_params() {
  fpoc::NonDimParams q;
  q.k = 1.0;
  q.s = 1.0;
  return q;
}

/// Bundled test case shrunk to a grid and horizon that run in well under a second.
inline fpoc::Scenario small_scenario(std::size_t points = 9, std::size_t steps = 10) {
  fpoc::Scenario s = fpoc::load_scenario(scenario_path("testcase1.scenario"));
  s.grid.points = points;
  s.time.steps = steps;
  s.time.substeps = 1;
  return s;
}

}  // namespace fixtures
