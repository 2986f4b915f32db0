#include "fpoc/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "fpoc/errors.hpp"
#include "fpoc/io.hpp"
#include "fpoc/ode.hpp"
#include "fpoc/sde.hpp"

namespace fpoc {

namespace {

std::string out_path(const Scenario& s, const std::string& file) {
  std::filesystem::create_directories(s.output_dir);
  return (std::filesystem::path(s.output_dir) / file).string();
}

/// Re-throws a library error with the pipeline stage prepended, keeping
/// its type so callers can still map it to an exit code.
template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ScenarioError& e) {
    throw ScenarioError(e.field(), fmt::format("[{}] {}", name, e.what()));
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("[{}] {}", name, e.what()));
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.time(), fmt::format("[{}] {}", name, e.what()));
  } catch (const SingularOperator& e) {
    throw SingularOperator(e.axis(), e.line(), fmt::format("[{}] {}", name, e.what()));
  } catch (const DiagnosticsError& e) {
    throw DiagnosticsError(fmt::format("[{}] {}", name, e.what()));
  }
}

CsvTable mean_table(const DensityField& field, std::vector<State>* means) {
  CsvTable t{{"t", "T", "N", "L", "C"}, {}};
  field.for_each([&](std::size_t m, const Snapshot& f) {
    const State x = mean_state(field.grid(), f);
    if (means) means->push_back(x);
    t.rows.push_back({field.time(m), x[0], x[1], x[2], x[3]});
  });
  return t;
}

CsvTable diagnostics_table(const DensityField& field) {
  const auto& d = field.diagnostics;
  CsvTable t{{"t", "mass", "min", "l2"}, {}};
  for (std::size_t m = 0; m < d.mass.size(); ++m) {
    t.rows.push_back({field.time(m), d.mass[m], d.min_value[m], d.l2[m]});
  }
  return t;
}

CsvTable marginal_table(const Grid4D& grid, const Snapshot& f, double time) {
  CsvTable t{{"t", "axis", "x", "density"}, {}};
  for (std::size_t a = 0; a < kDim; ++a) {
    const auto g = marginal(grid, f, a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      t.rows.push_back({time, static_cast<double>(a), grid.node(a, i), g[i]});
    }
  }
  return t;
}

}  // namespace

Scenario apply_options(Scenario s, const RunOptions& opt) {
  if (opt.output_dir) s.output_dir = *opt.output_dir;
  if (opt.seed) s.seed = *opt.seed;
  if (opt.checkpoint_every) {
    if (*opt.checkpoint_every < 1) throw ScenarioError("checkpoint_every", "--checkpoint-every must be >= 1");
    s.checkpoint_every = *opt.checkpoint_every;
  }
  if (s.grid.points > kDeskGridLimit && !opt.full_scale) {
    throw ScenarioError("grid.points",
                        fmt::format("grid.points = {} exceeds {}; pass --full-scale to run it",
                                    s.grid.points, kDeskGridLimit));
  }
  return s;
}

double trapezoid(std::span<const double> v, double dt) {
  if (v.size() < 2) return 0.0;
  double acc = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) acc += v[i];
  return acc * dt;
}

FokkerPlanckSolver make_solver(const Scenario& s) {
  return FokkerPlanckSolver(s.make_grid(), s.params, s.dispersion, s.time);
}

Snapshot make_initial_density(const Scenario& s) {
  return gaussian_density(s.make_grid(), s.initial_state, s.initial_variance);
}

TargetDensity make_target(const Scenario& s, Trajectory* trajectory) {
  Trajectory traj = integrate_untreated(s.initial_state, s.target_params(), s.time.final_time,
                                        s.target.ode_steps);
  TargetDensity target = build_target(traj, s.target.anchors, s.target.variance, s.make_grid(),
                                      s.time.final_time, s.time.steps);
  if (trajectory) *trajectory = std::move(traj);
  return target;
}

ControlSchedule zero_schedule(const Scenario& s) {
  return ControlSchedule(s.time.final_time, s.time.steps, s.doses.chemo_bound, s.doses.immuno_bound);
}

RunReport run_pipeline(const Scenario& s) {
  Trajectory traj;
  TargetDensity target = stage("target", [&] { return make_target(s, &traj); });
  write_csv(trajectory_table(traj), out_path(s, "target_trajectory.csv"));

  const FokkerPlanckSolver solver = stage("setup", [&] { return make_solver(s); });
  const Snapshot f0 = stage("setup", [&] { return make_initial_density(s); });
  const ControlSchedule u0 = zero_schedule(s);

  RunReport report;
  std::vector<State> untreated;
  stage("untreated forward", [&] {
    const DensityField field = solver.solve_forward(f0, u0, s.checkpoint_every);
    write_csv(mean_table(field, &untreated), out_path(s, "mean_untreated.csv"));
  });

  ControlProblem problem(solver, f0, target, s.weights, s.checkpoint_every);
  const OptimizationResult opt = stage("optimization", [&] { return pncg(u0, problem, s.optimizer); });
  write_trace(opt.trace, out_path(s, "trace.csv"));
  write_csv(schedule_table(opt.controls, s.doses), out_path(s, "schedule.csv"));

  std::vector<State> treated;
  stage("treated forward", [&] {
    const DensityField field = solver.solve_forward(f0, opt.controls, s.checkpoint_every);
    write_csv(mean_table(field, &treated), out_path(s, "mean_treated.csv"));
    write_csv(diagnostics_table(field), out_path(s, "diagnostics.csv"));
    report.max_mass_error = field.diagnostics.max_mass_error();
    report.min_density = field.diagnostics.min_density();
    report.envelope_exceeded = field.diagnostics.envelope_exceeded;
  });

  const DimensionalDoses dim = dimensionalize_controls(opt.controls, s.doses);
  // Dimensional time is t / k5.
  const double day = opt.controls.dt() / s.scaling.k5;
  report.objective = opt.trace.back().objective;
  report.iterations = opt.iterations;
  report.converged = opt.converged;
  report.line_search_failed = opt.line_search_failed;
  report.total_chemo_mg = trapezoid(dim.chemo, day);
  report.total_immuno_iu = trapezoid(dim.immuno, day);
  report.peak_immuno_iu = *std::max_element(dim.immuno.begin(), dim.immuno.end());
  for (std::size_t m = 0; m < treated.size(); ++m) {
    report.time.push_back(opt.controls.time(m));
    report.tumor_untreated.push_back(untreated[m][0]);
    report.tumor_treated.push_back(treated[m][0]);
  }
  report.controls = opt.controls;

  nlohmann::ordered_json j;
  j["scenario"] = s.name;
  j["objective"] = report.objective;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["line_search_failed"] = report.line_search_failed;
  j["max_mass_error"] = report.max_mass_error;
  j["min_density"] = report.min_density;
  j["envelope_exceeded"] = report.envelope_exceeded;
  j["total_chemo_mg"] = report.total_chemo_mg;
  j["total_immuno_iu_per_l"] = report.total_immuno_iu;
  j["peak_immuno_iu_per_l_per_day"] = report.peak_immuno_iu;
  j["mean_tumor_untreated"] = report.tumor_untreated;
  j["mean_tumor_treated"] = report.tumor_treated;
  std::ofstream(out_path(s, "report.json")) << j.dump(2) << '\n';
  return report;
}

ForwardReport run_forward(const Scenario& s, const std::optional<ControlSchedule>& u) {
  const FokkerPlanckSolver solver = stage("setup", [&] { return make_solver(s); });
  const Snapshot f0 = stage("setup", [&] { return make_initial_density(s); });
  ControlSchedule controls = u ? *u : zero_schedule(s);
  if (!controls.same_grid(zero_schedule(s))) {
    throw InvalidInput("control schedule does not match the scenario time grid");
  }
  ForwardReport report;
  stage("forward", [&] {
    const DensityField field = solver.solve_forward(f0, controls, s.checkpoint_every);
    write_csv(mean_table(field, &report.mean), out_path(s, "mean.csv"));
    write_csv(diagnostics_table(field), out_path(s, "diagnostics.csv"));
    const Snapshot last = field.snapshot(field.steps());
    write_csv(marginal_table(field.grid(), last, field.time(field.steps())), out_path(s, "marginals.csv"));
    write_density(out_path(s, "density_final.bin"), field.grid(), last, field.steps(),
                  field.time(field.steps()));
    report.max_mass_error = field.diagnostics.max_mass_error();
    report.min_density = field.diagnostics.min_density();
    report.envelope_exceeded = field.diagnostics.envelope_exceeded;
  });
  return report;
}

double OracleReport::max_l1() const {
  double m = 0.0;
  for (const auto& row : l1)
    for (double v : row) m = std::max(m, v);
  return m;
}

OracleReport run_oracle(const Scenario& s) {
  const Grid4D grid = s.make_grid();
  const FokkerPlanckSolver solver = stage("setup", [&] { return make_solver(s); });
  const Snapshot f0 = stage("setup", [&] { return make_initial_density(s); });
  const ControlSchedule u = zero_schedule(s);
  if (s.time.steps % 2 != 0) throw ScenarioError("time.steps", "the oracle needs an even number of time steps");
  if (s.oracle.steps % 2 != 0) throw ScenarioError("oracle.steps", "the oracle needs an even number of Euler steps");
  const std::size_t half = s.time.steps / 2;
  const std::vector<std::size_t> fp_index = {half, s.time.steps};
  const std::vector<double> times = {u.time(half), u.time(s.time.steps)};

  std::vector<Snapshot> fp;
  stage("forward", [&] {
    const DensityField field = solver.solve_forward(f0, u, s.checkpoint_every);
    for (std::size_t m : fp_index) fp.push_back(field.snapshot(m));
  });
  const PathEnsemble ens = stage("paths", [&] {
    return simulate_paths(DensitySampler(grid, f0), u, s.params, s.dispersion, grid, s.oracle.paths,
                          s.oracle.steps, s.seed, times, s.oracle.noise_induced_drift);
  });
  write_ensemble_summary(ens, out_path(s, "ensemble_summary.csv"));

  OracleReport report;
  report.times = times;
  CsvTable l1{{"t", "axis", "l1"}, {}};
  CsvTable marg{{"t", "axis", "x", "fp", "paths"}, {}};
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::array<double, kDim> row{};
    for (std::size_t a = 0; a < kDim; ++a) {
      const auto pde = marginal(grid, fp[k], a);
      const auto hist = marginal_histogram(ens, k, a, grid);
      row[a] = l1_distance(grid, a, pde, hist);
      l1.rows.push_back({times[k], static_cast<double>(a), row[a]});
      for (std::size_t i = 0; i < pde.size(); ++i) {
        marg.rows.push_back({times[k], static_cast<double>(a), grid.node(a, i), pde[i], hist[i]});
      }
    }
    report.l1.push_back(row);
  }
  write_csv(l1, out_path(s, "oracle_l1.csv"));
  write_csv(marg, out_path(s, "oracle_marginals.csv"));
  return report;
}

GradientCheckReport run_gradcheck(const Scenario& s) {
  const TargetDensity target = stage("target", [&] { return make_target(s); });
  ControlProblem problem(make_solver(s), make_initial_density(s), target, s.weights, s.checkpoint_every);
  ControlSchedule u = zero_schedule(s);
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.2, 0.8);
  for (std::size_t c = 0; c < 2; ++c)
    for (double& v : u.channel(c)) v = u.bound(c) * unit(rng);
  const GradientCheckReport report = stage("gradient check", [&] {
    return gradient_check(problem, u, s.gradcheck.directions, s.gradcheck.epsilon, s.seed + 1);
  });
  std::ofstream(out_path(s, "gradcheck.txt")) << report.to_text();
  return report;
}

TargetDensity run_target(const Scenario& s) {
  Trajectory traj;
  TargetDensity target = stage("target", [&] { return make_target(s, &traj); });
  write_csv(trajectory_table(traj), out_path(s, "target_trajectory.csv"));
  write_target_marginals(target, out_path(s, "target_marginals.csv"));
  return target;
}

}  // namespace fpoc
