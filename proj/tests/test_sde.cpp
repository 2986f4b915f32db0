#include <doctest.h>

#include <cmath>

#include "fpoc/errors.hpp"
#include "fpoc/sde.hpp"
#include "support/fixtures.hpp"

using namespace fpoc;

namespace {

NonDimParams mild_params() {
  NonDimParams q = fixtures::quiet_params();
  q.a = 0.4;
  q.b = 0.1;
  q.e = 0.1;
  q.f = 0.1;
  q.alpha = 0.2;
  q.beta = 0.1;
  q.chemo_kill = {0.3, 0.02, 0.02, 0.02};
  q.immuno_nk = 2.0;
  q.immuno_cd8 = 2.0;
  return q;
}

}  // namespace

TEST_CASE("path seeds differ per path and are reproducible") {
  CHECK(path_seed(1, 0) == path_seed(1, 0));
  CHECK(path_seed(1, 0) != path_seed(1, 1));
  CHECK(path_seed(1, 0) != path_seed(2, 0));
}

TEST_CASE("same seed gives the same ensemble") {
  const Grid4D g(0.0, 6.0, 9);
  const ControlSchedule u(1.0, 4, 7.0, 0.072);
  const State x0{{1.0, 1.0, 1.0, 1.0}};
  const auto a = simulate_paths(x0, u, mild_params(), DispersionModel{}, g, 64, 100, 42, {0.5, 1.0});
  const auto b = simulate_paths(x0, u, mild_params(), DispersionModel{}, g, 64, 100, 42, {0.5, 1.0});
  const auto c = simulate_paths(x0, u, mild_params(), DispersionModel{}, g, 64, 100, 43, {0.5, 1.0});
  REQUIRE(a.samples.size() == 2);
  bool differs = false;
  for (std::size_t p = 0; p < 64; ++p) {
    for (std::size_t i = 0; i < kDim; ++i) {
      CHECK(a.samples[1][p][i] == b.samples[1][p][i]);
      differs = differs || a.samples[1][p][i] != c.samples[1][p][i];
    }
  }
  CHECK(differs);
}

TEST_CASE("zero noise reproduces the explicit Euler path") {
  const Grid4D g(0.0, 6.0, 9);
  ControlSchedule u(2.0, 2, 7.0, 0.072);
  u.channel(0)[1] = 1.5;
  u.channel(1)[2] = 0.05;
  const auto q = mild_params();
  const State x0{{1.0, 1.2, 0.8, 1.5}};
  const std::size_t n = 400;
  const auto ens = simulate_paths(x0, u, q, DispersionModel{0.0, 1.2, 0.001}, g, 3, n, 9, {2.0});
  State x = x0;
  const double dt = 2.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto F = drift(x, u.at(dt * static_cast<double>(k)), q);
    for (std::size_t i = 0; i < kDim; ++i) x[i] += dt * F[i];
  }
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < kDim; ++i) CHECK(ens.samples[0][p][i] == doctest::Approx(x[i]).epsilon(1e-12));
  }
}

TEST_CASE("reflection keeps every sample inside the box") {
  const Grid4D g(0.0, 6.0, 9);
  const ControlSchedule u(5.0, 5, 7.0, 0.072);
  const auto ens = simulate_paths(State{{5.5, 0.2, 5.8, 0.1}}, u, mild_params(), DispersionModel{}, g,
                                  500, 500, 3, {1.0, 2.5, 5.0});
  for (const auto& slice : ens.samples) {
    for (const auto& x : slice) CHECK(g.contains(x));
  }
}

TEST_CASE("observation times must be on the step grid") {
  const Grid4D g(0.0, 6.0, 9);
  const ControlSchedule u(1.0, 2, 7.0, 0.072);
  CHECK_THROWS_AS(simulate_paths(State{{1, 1, 1, 1}}, u, mild_params(), DispersionModel{}, g, 4, 10, 1, {0.33}),
                  InvalidInput);
}

TEST_CASE("histogram of coincident samples is a single spike") {
  const Grid4D g(0.0, 6.0, 13);
  PathEnsemble ens;
  ens.paths = 10;
  ens.times = {0.0};
  ens.samples = {std::vector<State>(10, State{{g.node(0, 4), 1.0, 1.0, 1.0}})};
  const auto hist = marginal_histogram(ens, 0, 0, g);
  for (std::size_t i = 0; i < hist.size(); ++i) {
    CHECK(hist[i] == doctest::Approx(i == 4 ? 1.0 / g.h() : 0.0));
  }
  PathEnsemble empty;
  empty.times = {0.0};
  empty.samples = {{}};
  CHECK_THROWS(marginal_histogram(empty, 0, 0, g));
}

TEST_CASE("free reflected diffusion spreads to the uniform law") {
  const Grid4D g(0.0, 6.0, 13);
  const ControlSchedule u(40.0, 4, 7.0, 0.072);
  const auto ens = simulate_paths(State{{1.0, 3.0, 5.0, 2.0}}, u, fixtures::quiet_params(),
                                  DispersionModel{1.5, 0.0, 0.0}, g, 20000, 2000, 17, {40.0});
  const std::vector<double> flat(13, 1.0 / 6.0);
  for (std::size_t a = 0; a < kDim; ++a) {
    CHECK(l1_distance(g, a, marginal_histogram(ens, 0, a, g), flat) <= 0.05);
  }
}

TEST_CASE("density sampler reproduces the grid density") {
  const Grid4D g(0.0, 6.0, 13);
  Snapshot f(g.size(), 0.0);
  // Mass only on nodes with first index 3, spread evenly over the rest.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.unravel(i)[0] == 3) f[i] = 1.0;
  }
  const double mass = total_mass(g, f);
  for (double& v : f) v /= mass;
  DensitySampler sampler(g, f);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const State x = sampler.sample(rng);
    CHECK(x[0] >= g.node(0, 3) - 0.5 * g.h());
    CHECK(x[0] <= g.node(0, 3) + 0.5 * g.h());
    CHECK(g.contains(x));
  }
}
