#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fpoc/errors.hpp"
#include "fpoc/fp_solver.hpp"
#include "fpoc/pipeline.hpp"
#include "fpoc/target.hpp"
#include "support/fixtures.hpp"
#include "support/mms.hpp"

using namespace fpoc;

namespace {

double marginal_variance(const Grid4D& g, const Snapshot& f, std::size_t axis) {
  const auto m = marginal(g, f, axis);
  const auto w = g.weights(axis);
  double mean = 0.0, second = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    mean += w[i] * m[i] * g.node(axis, i);
    second += w[i] * m[i] * g.node(axis, i) * g.node(axis, i);
  }
  return second - mean * mean;
}

DispersionModel constant_sigma(double s) { return DispersionModel{s, 0.0, 0.0}; }

}  // namespace

TEST_CASE("grid quadrature and moments") {
  const Grid4D g(0.0, 6.0, 7);
  CHECK(g.h() == 1.0);
  Snapshot uniform(g.size(), 1.0 / std::pow(6.0, 4));
  CHECK(total_mass(g, uniform) == doctest::Approx(1.0).epsilon(1e-12));
  const auto mu = mean_state(g, uniform);
  for (std::size_t a = 0; a < kDim; ++a) CHECK(mu[a] == doctest::Approx(3.0).epsilon(1e-14));

  CHECK(total_mass(g, Snapshot(g.size(), 0.0)) == 0.0);
  CHECK_THROWS_AS(mean_state(g, Snapshot(g.size(), 0.0)), DiagnosticsError);

  const Grid4D fine(0.0, 6.0, 25);
  const State c{{2.0, 3.1, 2.7, 3.6}};
  const auto f = gaussian_density(fine, c, 0.2);
  CHECK(total_mass(fine, f) == doctest::Approx(1.0).epsilon(1e-8));
  const auto m = mean_state(fine, f);
  for (std::size_t a = 0; a < kDim; ++a) CHECK(std::abs(m[a] - c[a]) <= fine.h());
}

TEST_CASE("index round trip") {
  const Grid4D g(0.0, 6.0, 5);
  for (std::size_t i : {std::size_t{0}, std::size_t{17}, g.size() - 1}) CHECK(g.index(g.unravel(i)) == i);
  CHECK(g.contains(State{{0.0, 6.0, 3.0, 1.0}}));
  CHECK_FALSE(g.contains(State{{-0.1, 1.0, 1.0, 1.0}}));
}

TEST_CASE("uniform density is a no-flux equilibrium without drift") {
  const Grid4D g(0.0, 6.0, 9);
  FokkerPlanckSolver solver(g, fixtures::quiet_params(), constant_sigma(0.7), TimeSpec{1.0, 4, 1});
  Snapshot f(g.size(), 1.0 / std::pow(6.0, 4));
  const Snapshot next = solver.step(f, {0.0, 0.0}, 0.25);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(next[i] - f[i]));
  CHECK(worst <= 1e-15);
}

TEST_CASE("one step conserves mass and stays non-negative") {
  const auto s = fixtures::small_scenario(11, 10);
  const auto solver = make_solver(s);
  const auto f0 = make_initial_density(s);
  for (double u1 : {0.0, 7.0}) {
    const auto f1 = solver.step(f0, {u1, 0.072}, 0.25);
    CHECK(std::abs(total_mass(s.make_grid(), f1) - total_mass(s.make_grid(), f0)) <= 1e-10);
  }
  const auto f1 = solver.step(f0, {0.0, 0.0}, 0.05);
  CHECK(*std::min_element(f1.begin(), f1.end()) >= 0.0);
}

TEST_CASE("early variance growth follows the heat kernel") {
  const Grid4D g(0.0, 6.0, 25);
  const double sigma = 0.5, T = 0.2;
  FokkerPlanckSolver solver(g, fixtures::quiet_params(), constant_sigma(sigma), TimeSpec{T, 8, 1});
  const auto f0 = gaussian_density(g, State{{3.0, 3.0, 3.0, 3.0}}, 0.1);
  const ControlSchedule u(T, 8, 7.0, 0.072);
  const auto field = solver.solve_forward(f0, u, 8);
  const auto f = field.snapshot(8);
  for (std::size_t a = 0; a < kDim; ++a) {
    const double grown = marginal_variance(g, f, a) - marginal_variance(g, f0, a);
    CHECK(grown == doctest::Approx(sigma * sigma * T).epsilon(0.02));
  }
}

TEST_CASE("large diffusion relaxes to the uniform density") {
  const Grid4D g(0.0, 6.0, 7);
  FokkerPlanckSolver solver(g, fixtures::quiet_params(), constant_sigma(3.0), TimeSpec{40.0, 400, 1});
  const auto f0 = gaussian_density(g, State{{1.0, 2.0, 4.0, 5.0}}, 0.5);
  const auto field = solver.solve_forward(f0, ControlSchedule(40.0, 400, 7.0, 0.072), 100);
  const auto f = field.snapshot(400);
  for (double v : f) CHECK(v == doctest::Approx(1.0 / 1296.0).epsilon(1e-6));
}

TEST_CASE("forward solve diagnostics and checkpoint replay") {
  const auto s = fixtures::small_scenario(9, 10);
  const auto solver = make_solver(s);
  const auto f0 = make_initial_density(s);
  ControlSchedule u(s.time.final_time, s.time.steps, 7.0, 0.072);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (std::size_t m = 0; m < u.samples(); ++m) {
    u.channel(0)[m] = 7.0 * U(rng);
    u.channel(1)[m] = 0.072 * U(rng);
  }
  const auto every = solver.solve_forward(f0, u, 1);
  const auto sparse = solver.solve_forward(f0, u, 4);
  CHECK(every.diagnostics.max_mass_error() <= 1e-10);
  CHECK_FALSE(every.diagnostics.envelope_exceeded);
  for (std::size_t m : {3, 7, 10}) CHECK(sparse.snapshot(m) == every.snapshot(m));
  std::vector<std::size_t> order;
  sparse.for_each_reverse([&](std::size_t m, const Snapshot& f) {
    order.push_back(m);
    CHECK(f == every.snapshot(m));
  });
  CHECK(order.size() == 11);
  CHECK(order.front() == 10);
  CHECK(order.back() == 0);
}

TEST_CASE("forward solve rejects bad inputs") {
  const auto s = fixtures::small_scenario(9, 10);
  const auto solver = make_solver(s);
  auto f0 = make_initial_density(s);
  ControlSchedule u(s.time.final_time, s.time.steps, 7.0, 0.072);
  CHECK_THROWS_AS(solver.solve_forward(f0, ControlSchedule(10.0, 5, 7.0, 0.072)), InvalidInput);
  u.channel(0)[2] = 9.0;
  CHECK_THROWS_AS(solver.solve_forward(f0, u), InvalidInput);
  u.channel(0)[2] = 0.0;
  for (double& v : f0) v *= 2.0;
  CHECK_THROWS_AS(solver.solve_forward(f0, u), InvalidInput);
}

TEST_CASE("manufactured solution converges at second order") {
  const auto p = mms::observed_orders({11, 21, 41});
  REQUIRE(p.size() == 2);
  CHECK(p[0] >= 1.7);
  CHECK(p[1] >= 1.7);
}
