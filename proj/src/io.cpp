#include "fpoc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

static_assert(std::endian::native == std::endian::little, "density files assume a little-endian host");

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw InvalidInput(fmt::format("CSV has no column '{}'", name));
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path));
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << table.columns[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt::format("{:.17g}", row[i]);
    out << '\n';
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(fmt::format("{} is empty", path));
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput(fmt::format("{}:{}: '{}' is not a number", path, lineno, cell));
      }
    }
    if (row.size() != table.columns.size()) {
      throw InvalidInput(fmt::format("{}:{}: expected {} values", path, lineno, table.columns.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable trajectory_table(const Trajectory& traj) {
  CsvTable t{{"t", "T", "N", "L", "C"}, {}};
  for (std::size_t m = 0; m < traj.time.size(); ++m) {
    const State& x = traj.state[m];
    t.rows.push_back({traj.time[m], x[0], x[1], x[2], x[3]});
  }
  return t;
}

CsvTable schedule_table(const ControlSchedule& u, const DoseSpec& doses) {
  const DimensionalDoses dim = dimensionalize_controls(u, doses);
  CsvTable t{{"t", "u1", "u2", "u1_mg_per_day", "u2_iu_per_l_per_day"}, {}};
  for (std::size_t m = 0; m < u.samples(); ++m) {
    t.rows.push_back({u.time(m), u.channel(0)[m], u.channel(1)[m], dim.chemo[m], dim.immuno[m]});
  }
  return t;
}

ControlSchedule read_schedule(const std::string& path, double chemo_bound, double immuno_bound) {
  const CsvTable t = read_csv(path);
  const std::size_t ct = t.column("t"), c1 = t.column("u1"), c2 = t.column("u2");
  if (t.rows.size() < 2) throw InvalidInput(fmt::format("{} needs at least two samples", path));
  const std::size_t steps = t.rows.size() - 1;
  const double T = t.rows.back()[ct];
  ControlSchedule u(T, steps, chemo_bound, immuno_bound);
  for (std::size_t m = 0; m <= steps; ++m) {
    if (std::abs(t.rows[m][ct] - u.time(m)) > 1e-9 * std::max(1.0, T)) {
      throw InvalidInput(fmt::format("{}: sample {} is not on a uniform time grid", path, m));
    }
    u.channel(0)[m] = t.rows[m][c1];
    u.channel(1)[m] = t.rows[m][c2];
  }
  return u;
}

void write_density(const std::string& path, const Grid4D& grid, const Snapshot& f,
                   std::size_t time_index, double time) {
  if (f.size() != grid.size()) throw InvalidInput("snapshot does not match the grid");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path));
  out << "FPOC-DENSITY 1\n";
  out << fmt::format("points {} {} {} {}\n", grid.points(0), grid.points(1), grid.points(2), grid.points(3));
  out << fmt::format("lower {:.17g} {:.17g} {:.17g} {:.17g}\n", grid.lower(0), grid.lower(1), grid.lower(2), grid.lower(3));
  out << fmt::format("upper {:.17g} {:.17g} {:.17g} {:.17g}\n", grid.upper(0), grid.upper(1), grid.upper(2), grid.upper(3));
  out << fmt::format("time_index {}\n", time_index);
  out << fmt::format("time {:.17g}\n", time);
  out << "data float64 little-endian C-order\n";
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
}

DensityFile read_density(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  std::string line;
  auto next = [&](const char* key) {
    if (!std::getline(in, line) || line.rfind(key, 0) != 0) {
      throw InvalidInput(fmt::format("{}: expected header line '{}'", path, key));
    }
    return std::istringstream(line.substr(std::strlen(key)));
  };
  next("FPOC-DENSITY 1");
  std::array<std::size_t, kDim> points{};
  std::array<double, kDim> lower{}, upper{};
  {
    auto ss = next("points");
    for (auto& v : points) ss >> v;
  }
  {
    auto ss = next("lower");
    for (auto& v : lower) ss >> v;
  }
  {
    auto ss = next("upper");
    for (auto& v : upper) ss >> v;
  }
  DensityFile out;
  next("time_index") >> out.time_index;
  next("time") >> out.time;
  next("data float64 little-endian C-order");
  out.grid = Grid4D(lower, upper, points);
  out.values.resize(out.grid.size());
  in.read(reinterpret_cast<char*>(out.values.data()),
          static_cast<std::streamsize>(out.values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(out.values.size() * sizeof(double))) {
    throw InvalidInput(fmt::format("{}: truncated density data", path));
  }
  return out;
}

}  // namespace fpoc
