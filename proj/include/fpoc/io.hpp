#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fpoc/grid.hpp"
#include "fpoc/model.hpp"
#include "fpoc/ode.hpp"
#include "fpoc/scenario.hpp"

namespace fpoc {

/// Numeric CSV table with a header row. Values are written with 17
/// significant digits so reading them back reproduces the doubles exactly.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

/// Columns t, T, N, L, C.
CsvTable trajectory_table(const Trajectory& traj);
/// Columns t, u1, u2, u1_mg_per_day, u2_iu_per_l_per_day.
CsvTable schedule_table(const ControlSchedule& u, const DoseSpec& doses);
/// Rebuilds a schedule from the t, u1, u2 columns of a schedule CSV.
ControlSchedule read_schedule(const std::string& path, double chemo_bound, double immuno_bound);

/// Binary density snapshot. Layout:
///   FPOC-DENSITY 1\n
///   points <n0> <n1> <n2> <n3>\n
///   lower <l0> <l1> <l2> <l3>\n
///   upper <u0> <u1> <u2> <u3>\n
///   time_index <m>\n
///   time <t>\n
///   data float64 little-endian C-order\n
/// followed by n0*n1*n2*n3 IEEE-754 doubles, last axis fastest. Header
/// numbers use 17 significant digits.
void write_density(const std::string& path, const Grid4D& grid, const Snapshot& f,
                   std::size_t time_index, double time);

struct DensityFile {
  Grid4D grid;
  std::size_t time_index = 0;
  double time = 0.0;
  Snapshot values;
};
DensityFile read_density(const std::string& path);

}  // namespace fpoc
