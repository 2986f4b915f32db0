// Command-line front end: solve, forward, oracle, gradcheck, target.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fpoc/errors.hpp"
#include "fpoc/io.hpp"
#include "fpoc/pipeline.hpp"
#include "fpoc/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitLineSearch = 4;

struct Common {
  std::string scenario;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  bool full_scale = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("scenario", c.scenario, "scenario file")->required();
  cmd->add_option("--out", c.out, "output directory (overrides the scenario)");
  cmd->add_option("--seed", c.seed, "random seed (overrides the scenario)");
  cmd->add_option("--checkpoint-every", c.checkpoint_every, "store every K-th density snapshot");
  cmd->add_flag("--full-scale", c.full_scale, "allow grids above 21 points per axis");
}

fpoc::Scenario load(const Common& c, CLI::App* cmd) {
  fpoc::RunOptions opt;
  if (cmd->count("--out")) opt.output_dir = c.out;
  if (cmd->count("--seed")) opt.seed = c.seed;
  if (cmd->count("--checkpoint-every")) opt.checkpoint_every = c.checkpoint_every;
  opt.full_scale = c.full_scale;
  return fpoc::apply_options(fpoc::load_scenario(c.scenario), opt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fokker-Planck optimal control of combination cancer therapy"};
  app.require_subcommand(1);
  Common common;
  std::string controls_path;

  auto* solve = app.add_subcommand("solve", "target, untreated solve, optimisation, treated solve");
  auto* forward = app.add_subcommand("forward", "forward Fokker-Planck solve");
  auto* oracle = app.add_subcommand("oracle", "compare against reflected Euler-Maruyama paths");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of the adjoint gradient");
  auto* target = app.add_subcommand("target", "emit the target density marginals");
  for (auto* cmd : {solve, forward, oracle, gradcheck, target}) add_common(cmd, common);
  forward->add_option("--controls", controls_path, "schedule CSV with columns t, u1, u2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (solve->parsed()) {
      const auto s = load(common, solve);
      const auto r = fpoc::run_pipeline(s);
      fmt::print("J = {:.6g} after {} iterations{}\n", r.objective, r.iterations,
                 r.converged ? " (converged)" : "");
      fmt::print("doxorubicin total {:.6g} mg, IL-2 peak {:.6g} IU/l/day\n", r.total_chemo_mg,
                 r.peak_immuno_iu);
      fmt::print("mass error {:.3e}, min density {:.3e}\n", r.max_mass_error, r.min_density);
      if (r.line_search_failed) {
        fmt::print(stderr, "line search failed; best iterate written to {}\n", s.output_dir);
        return kExitLineSearch;
      }
    } else if (forward->parsed()) {
      const auto s = load(common, forward);
      std::optional<fpoc::ControlSchedule> u;
      if (!controls_path.empty()) {
        u = fpoc::read_schedule(controls_path, s.doses.chemo_bound, s.doses.immuno_bound);
      }
      const auto r = fpoc::run_forward(s, u);
      fmt::print("mass error {:.3e}, min density {:.3e}{}\n", r.max_mass_error, r.min_density,
                 r.envelope_exceeded ? ", L2 envelope exceeded" : "");
    } else if (oracle->parsed()) {
      const auto s = load(common, oracle);
      const auto r = fpoc::run_oracle(s);
      for (std::size_t k = 0; k < r.times.size(); ++k) {
        fmt::print("t = {:g}: L1 = {:.4f} {:.4f} {:.4f} {:.4f}\n", r.times[k], r.l1[k][0], r.l1[k][1],
                   r.l1[k][2], r.l1[k][3]);
      }
    } else if (gradcheck->parsed()) {
      const auto s = load(common, gradcheck);
      const auto r = fpoc::run_gradcheck(s);
      fmt::print("{}", r.to_text());
      if (r.max_relative_error() > s.gradcheck.tolerance) {
        fmt::print(stderr, "gradient check exceeds tolerance {:g}\n", s.gradcheck.tolerance);
        return kExitSolver;
      }
    } else if (target->parsed()) {
      const auto s = load(common, target);
      fpoc::run_target(s);
      fmt::print("target written to {}\n", s.output_dir);
    }
  } catch (const fpoc::ScenarioError& e) {
    fmt::print(stderr, "scenario error: {}\n", e.what());
    return kExitValidation;
  } catch (const fpoc::InvalidInput& e) {
    fmt::print(stderr, "invalid input: {}\n", e.what());
    return kExitValidation;
  } catch (const fpoc::Error& e) {
    fmt::print(stderr, "solver failure: {}\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitSolver;
  }
  return kExitOk;
}
