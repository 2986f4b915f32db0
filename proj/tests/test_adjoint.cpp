#include <doctest.h>

#include <cmath>
#include <random>

#include "fpoc/adjoint.hpp"
#include "fpoc/errors.hpp"
#include "fpoc/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace fpoc;

namespace {

DensityField field_from_target(const TargetDensity& target, const TimeSpec& time) {
  DensityField f(target.grid(), time, 1, [](const Snapshot&, std::size_t) -> Snapshot {
    throw Error("no replay in this fixture");
  });
  for (std::size_t m = 0; m <= time.steps; ++m) f.store(m, target.snapshot(m));
  return f;
}

ControlSchedule random_interior(const Scenario& s, std::uint64_t seed) {
  ControlSchedule u(s.time.final_time, s.time.steps, s.doses.chemo_bound, s.doses.immuno_bound);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.2, 0.8);
  for (std::size_t c = 0; c < 2; ++c) {
    for (double& v : u.channel(c)) v = U(rng) * u.bound(c);
  }
  return u;
}

}  // namespace

TEST_CASE("objective vanishes on exact tracking with zero dose") {
  const auto s = fixtures::small_scenario(7, 6);
  const auto target = make_target(s);
  const auto f = field_from_target(target, s.time);
  const ControlSchedule u = zero_schedule(s);
  CHECK(objective(f, target, u, s.weights) == 0.0);
}

TEST_CASE("constant chemotherapy costs nu c^2 T / 2") {
  const auto s = fixtures::small_scenario(7, 6);
  const auto target = make_target(s);
  const auto f = field_from_target(target, s.time);
  ControlSchedule u = zero_schedule(s);
  for (double& v : u.channel(0)) v = 3.0;
  const auto terms = objective_terms(f, target, u, s.weights);
  CHECK(terms.tracking == 0.0);
  CHECK(terms.chemo == doctest::Approx(0.5 * s.weights.nu_chemo * 9.0 * s.time.final_time).epsilon(1e-13));
  CHECK(terms.immuno == 0.0);
}

TEST_CASE("objective is non-negative and rejects misaligned grids") {
  const auto s = fixtures::small_scenario(7, 6);
  const auto solver = make_solver(s);
  const auto target = make_target(s);
  const auto f = solver.solve_forward(make_initial_density(s), zero_schedule(s));
  CHECK(objective(f, target, zero_schedule(s), s.weights) > 0.0);
  const auto other = fixtures::small_scenario(9, 6);
  CHECK_THROWS(objective(f, make_target(other), zero_schedule(s), s.weights));
}

TEST_CASE("adjoint vanishes without forcing") {
  const auto s = fixtures::small_scenario(7, 6);
  const auto solver = make_solver(s);
  const auto target = make_target(s);
  const auto u = random_interior(s, 1);
  const auto f = solver.solve_forward(make_initial_density(s), u);
  SUBCASE("alpha = 0") {
    const auto p = solve_adjoint(solver, f, target, u, 0.0);
    for (const auto& snap : p.p) {
      for (double v : snap) CHECK(v == 0.0);
    }
  }
  SUBCASE("f = f*") {
    const auto exact = field_from_target(target, s.time);
    const auto p = solve_adjoint(solver, exact, target, u, 1.0);
    for (const auto& snap : p.p) {
      for (double v : snap) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("gradient reduces to the regularisation term when p = 0") {
  const auto s = fixtures::small_scenario(7, 6);
  const auto solver = make_solver(s);
  const auto u = random_interior(s, 2);
  const auto f = solver.solve_forward(make_initial_density(s), u);
  AdjointField p{s.make_grid(), std::vector<Snapshot>(s.time.steps + 1, Snapshot(s.make_grid().size(), 0.0))};
  const auto g = reduced_gradient(solver, f, p, u, s.weights);
  for (std::size_t m = 0; m < u.samples(); ++m) {
    CHECK(g.g[0][m] == doctest::Approx(s.weights.nu_chemo * u.channel(0)[m]).epsilon(1e-13));
    CHECK(g.g[1][m] == doctest::Approx(s.weights.nu_immuno * u.channel(1)[m]).epsilon(1e-13));
  }
  const auto g0 = reduced_gradient(solver, f, p, zero_schedule(s), s.weights);
  for (std::size_t c = 0; c < 2; ++c) {
    for (double v : g0.g[c]) CHECK(v == 0.0);
  }
}

TEST_CASE("adjoint gradient matches central differences") {
  auto s = fixtures::small_scenario(9, 8);
  s.time.substeps = 2;
  ControlProblem problem(make_solver(s), make_initial_density(s), make_target(s), s.weights, 3);
  const auto report = gradient_check(problem, random_interior(s, 3), 3, 1e-4, 11);
  CHECK(report.entries.size() == 3);
  CHECK(report.max_relative_error() <= 1e-3);
}

TEST_CASE("fused evaluation agrees with separate passes") {
  const auto s = fixtures::small_scenario(7, 6);
  ControlProblem problem(make_solver(s), make_initial_density(s), make_target(s), s.weights, 2);
  const auto u = random_interior(s, 4);
  ControlGradient g;
  const double J = problem.value_and_gradient(u, g);
  CHECK(J == problem.value(u));
  const auto f = problem.forward(u);
  const auto p = solve_adjoint(problem.solver(), f, problem.target(), u, s.weights.alpha);
  const auto g_ref = reduced_gradient(problem.solver(), f, p, u, s.weights);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t m = 0; m < u.samples(); ++m) {
      CHECK(g.g[c][m] == doctest::Approx(g_ref.g[c][m]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient check refuses inadmissible perturbations") {
  const auto s = fixtures::small_scenario(7, 4);
  ControlProblem problem(make_solver(s), make_initial_density(s), make_target(s), s.weights);
  CHECK_THROWS(gradient_check(problem, zero_schedule(s), 1, 1e-4, 1));
}
