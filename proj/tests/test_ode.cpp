#include <doctest.h>

#include <cmath>

#include "fpoc/errors.hpp"
#include "fpoc/ode.hpp"
#include "support/fixtures.hpp"

using namespace fpoc;

TEST_CASE("logistic tumour growth follows the closed form") {
  NonDimParams q = fixtures::quiet_params();
  q.a = 1.0;
  q.b = 1.0;
  const State x0{{0.5, 0.0, 0.0, 0.0}};
  const auto traj = integrate_untreated(x0, q, 5.0, 200);
  for (std::size_t k = 0; k < traj.time.size(); k += 20) {
    const double t = traj.time[k];
    CHECK(traj.state[k][0] == doctest::Approx(1.0 / (1.0 + std::exp(-t))).epsilon(1e-9));
  }
  CHECK(traj.clip_events == 0);
}

TEST_CASE("RK4 converges at fourth order") {
  NonDimParams q = fixtures::quiet_params();
  q.a = 1.0;
  q.b = 1.0;
  const State x0{{0.1, 0.0, 0.0, 0.0}};
  const double exact = 1.0 / (1.0 + 9.0 * std::exp(-4.0));
  const double e1 = std::abs(integrate_untreated(x0, q, 4.0, 10).state.back()[0] - exact);
  const double e2 = std::abs(integrate_untreated(x0, q, 4.0, 20).state.back()[0] - exact);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("equilibrium of the lymphocyte source") {
  NonDimParams q = fixtures::quiet_params();
  q.alpha = 0.3;
  q.beta = 0.1;
  const State x0{{0.0, 0.0, 0.0, 3.0}};
  const auto traj = integrate_untreated(x0, q, 10.0, 50);
  for (const auto& x : traj.state) CHECK(x[3] == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("doses enter through the schedule") {
  NonDimParams q = fixtures::quiet_params();
  q.chemo_kill = {0.5, 0.0, 0.0, 0.0};
  ControlSchedule u(2.0, 2, 7.0, 0.072);
  u.channel(0)[0] = u.channel(0)[1] = u.channel(0)[2] = 1.0;
  const auto traj = integrate({{1.0, 0.0, 0.0, 0.0}}, u, q, 2.0, 400);
  CHECK(traj.state.back()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
}

TEST_CASE("negative components are clipped and counted") {
  NonDimParams q = fixtures::quiet_params();
  q.alpha = -5.0;  // drives C below zero
  q.beta = 0.0;
  const auto traj = integrate_untreated({{0.0, 0.0, 0.0, 0.1}}, q, 1.0, 10);
  CHECK(traj.clip_events > 0);
  CHECK(traj.first_clip_time > 0.0);
  for (const auto& x : traj.state) CHECK(x[3] >= 0.0);
}

TEST_CASE("non-finite state raises a divergence error") {
  NonDimParams q = fixtures::quiet_params();
  q.a = 1e300;
  CHECK_THROWS_AS(integrate_untreated({{1.0, 0.0, 0.0, 0.0}}, q, 1.0, 10), DivergenceError);
}

TEST_CASE("trajectory interpolation") {
  NonDimParams q = fixtures::quiet_params();
  q.alpha = 1.0;
  const auto traj = integrate_untreated({{0.0, 0.0, 0.0, 0.0}}, q, 2.0, 4);
  CHECK(traj.at(0.75)[3] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(traj.at(5.0)[3] == doctest::Approx(2.0).epsilon(1e-12));
}
