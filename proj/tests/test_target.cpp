#include <doctest.h>

#include <cmath>
#include <string>

#include "fpoc/errors.hpp"
#include "fpoc/ode.hpp"
#include "fpoc/target.hpp"

using namespace fpoc;

namespace {

Trajectory line_trajectory(const State& a, const State& b, double T, std::size_t n) {
  Trajectory traj;
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(n);
    State x;
    for (std::size_t i = 0; i < kDim; ++i) x[i] = (1 - s) * a[i] + s * b[i];
    traj.time.push_back(T * s);
    traj.state.push_back(x);
  }
  return traj;
}

}  // namespace

TEST_CASE("identical anchors give identical snapshots") {
  const Grid4D g(0.0, 6.0, 9);
  const State c{{1.0, 2.0, 3.0, 4.0}};
  const auto traj = line_trajectory(c, c, 10.0, 10);
  const auto target = build_target(traj, 2, 0.05, g, 10.0, 7);
  const auto first = target.snapshot(0);
  for (std::size_t m = 1; m <= 7; ++m) {
    const auto snap = target.snapshot(m);
    for (std::size_t i = 0; i < snap.size(); ++i) CHECK(snap[i] == doctest::Approx(first[i]).epsilon(1e-13));
  }
}

TEST_CASE("snapshots have unit mass and follow the trajectory") {
  const Grid4D g(0.0, 6.0, 13);
  const auto traj = line_trajectory({{0.5, 1.0, 1.0, 1.0}}, {{4.0, 2.0, 1.5, 3.0}}, 10.0, 100);
  const auto target = build_target(traj, 20, 0.05, g, 10.0, 40);
  for (std::size_t m = 0; m <= 40; m += 3) {
    const auto f = target.snapshot(m);
    CHECK(total_mass(g, f) == doctest::Approx(1.0).epsilon(1e-8));
    for (double v : f) CHECK(v >= 0.0);
  }
  // Anchors sit on the trajectory, so at anchor times the centroid is within h.
  const auto f = target.snapshot(0);
  const auto mu = mean_state(g, f);
  for (std::size_t a = 0; a < kDim; ++a) CHECK(std::abs(mu[a] - traj.state[0][a]) <= g.h());
  CHECK(target.anchor_times().size() == 20);
  CHECK(target.anchor_times().back() == 10.0);
}

TEST_CASE("marginal of a snapshot integrates to one") {
  const Grid4D g(0.0, 6.0, 9);
  const auto traj = line_trajectory({{1.0, 1.0, 1.0, 1.0}}, {{2.0, 1.0, 1.0, 1.0}}, 5.0, 10);
  const auto target = build_target(traj, 3, 0.05, g, 5.0, 10);
  const auto m = target.marginal(4, 0);
  const auto w = g.weights(0);
  double mass = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) mass += w[i] * m[i];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("anchor outside the box is rejected by index") {
  const Grid4D g(0.0, 6.0, 9);
  const auto traj = line_trajectory({{1.0, 1.0, 1.0, 1.0}}, {{9.0, 1.0, 1.0, 1.0}}, 10.0, 10);
  try {
    build_target(traj, 4, 0.05, g, 10.0, 10);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("anchor 2") != std::string::npos);
  }
}
