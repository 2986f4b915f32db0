#include <doctest.h>

#include <cmath>
#include <functional>

#include "fpoc/errors.hpp"
#include "fpoc/optimizer.hpp"
#include "fpoc/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace fpoc;

namespace {

/// J(u) = sum_c 1/2 int a_c(t) (u_c - target_c)^2 dt with trapezoid quadrature.
class BoxQuadratic : public DifferentiableObjective {
 public:
  BoxQuadratic(std::size_t steps, double T) : a_(T, steps + 1), c_(T, steps + 1) {
    for (std::size_t m = 0; m <= steps; ++m) {
      const double t = T * static_cast<double>(m) / static_cast<double>(steps);
      a_.g[0][m] = 1.0 + 0.4 * std::sin(t);
      a_.g[1][m] = 0.8 + 0.2 * std::cos(t);
      c_.g[0][m] = 9.0 * std::sin(0.7 * t);      // leaves [0, 7] on both sides
      c_.g[1][m] = 0.05 + 0.05 * std::cos(t);    // crosses 0.072
    }
  }

  double value(const ControlSchedule& u) const override {
    const auto w = time_weights(u.samples(), u.dt());
    double J = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t m = 0; m < w.size(); ++m) {
        const double r = u.channel(c)[m] - c_.g[c][m];
        J += 0.5 * w[m] * a_.g[c][m] * r * r;
      }
    }
    return J;
  }

  double value_and_gradient(const ControlSchedule& u, ControlGradient& g) const override {
    g = ControlGradient::like(u);
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t m = 0; m < u.samples(); ++m) g.g[c][m] = a_.g[c][m] * (u.channel(c)[m] - c_.g[c][m]);
    }
    return value(u);
  }

  double minimiser(std::size_t c, std::size_t m, double bound) const {
    return std::clamp(c_.g[c][m], 0.0, bound);
  }

 private:
  ControlGradient a_, c_;
};

ControlGradient scalar_series(double v) {
  ControlGradient g(1.0, 2);
  g.g[0] = {v, v};
  return g;
}

}  // namespace

TEST_CASE("projection clips to the box") {
  ControlSchedule u(1.0, 1, 7.0, 0.072);
  u.channel(0)[0] = -0.3;
  u.channel(0)[1] = 8.0;
  u.channel(1)[0] = 0.05;
  u.channel(1)[1] = 0.1;
  const auto p = project(u);
  CHECK(p.channel(0)[0] == 0.0);
  CHECK(p.channel(0)[1] == 7.0);
  CHECK(p.channel(1)[0] == 0.05);
  CHECK(p.channel(1)[1] == 0.072);
  CHECK(active_bounds(p) == 3);
}

TEST_CASE("Hager-Zhang beta") {
  // d = 1, y = 2, g_next = 3: (6 - 2 * 4 / 2 * 3) / 2 = -3.
  CHECK(hager_zhang_beta(scalar_series(3), scalar_series(2), scalar_series(1)) == doctest::Approx(-3.0));
  CHECK(hager_zhang_beta(scalar_series(0), scalar_series(2), scalar_series(1)) == 0.0);
  CHECK(hager_zhang_beta(scalar_series(3), scalar_series(0), scalar_series(1)) == 0.0);
}

TEST_CASE("H1 smoothing preserves constants and the mean") {
  ControlGradient g(10.0, 21);
  for (std::size_t m = 0; m < 21; ++m) {
    g.g[0][m] = 2.5;
    g.g[1][m] = (m % 2 == 0) ? 1.0 : -1.0;
  }
  const auto s = smooth_h1(g, 0.1);
  for (double v : s.g[0]) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  const auto w = time_weights(21, g.dt());
  double mean_in = 0.0, mean_out = 0.0, var_in = 0.0, var_out = 0.0;
  for (std::size_t m = 0; m < 21; ++m) {
    mean_in += w[m] * g.g[1][m];
    mean_out += w[m] * s.g[1][m];
    var_in += w[m] * g.g[1][m] * g.g[1][m];
    var_out += w[m] * s.g[1][m] * s.g[1][m];
  }
  CHECK(mean_out == doctest::Approx(mean_in).epsilon(1e-12));
  CHECK(var_out < var_in);
}

TEST_CASE("Armijo accepts the exact step on a quadratic") {
  BoxQuadratic J(10, 1.0);
  ControlSchedule u(1.0, 10, 7.0, 0.072);
  for (double& v : u.channel(0)) v = 3.0;
  ControlGradient g;
  const double J0 = J.value_and_gradient(u, g);
  ControlGradient d = g;
  for (auto& ch : d.g) for (double& v : ch) v = -v;
  PncgConfig cfg;
  const auto r = armijo_step(u, d, g, J0, [&](const ControlSchedule& v) { return J.value(v); }, cfg);
  CHECK(r.accepted);
  CHECK(r.backtracks == 0);
  CHECK(r.objective < J0);
}

TEST_CASE("Armijo backtracks until sufficient decrease") {
  BoxQuadratic J(10, 1.0);
  ControlSchedule u(1.0, 10, 7.0, 0.072);
  for (double& v : u.channel(0)) v = 3.0;
  ControlGradient g;
  const double J0 = J.value_and_gradient(u, g);
  ControlGradient d = g;
  for (auto& ch : d.g) for (double& v : ch) v = -v;
  PncgConfig cfg;
  cfg.initial_step = 16.0;
  const auto r = armijo_step(u, d, g, J0, [&](const ControlSchedule& v) { return J.value(v); }, cfg);
  CHECK(r.accepted);
  CHECK(r.backtracks > 0);
  CHECK(r.step == doctest::Approx(16.0 * std::pow(0.5, static_cast<double>(r.backtracks))));
}

TEST_CASE("Armijo with zero gradient accepts without moving") {
  BoxQuadratic J(4, 1.0);
  ControlSchedule u(1.0, 4, 7.0, 0.072);
  const ControlGradient zero = ControlGradient::like(u);
  const double J0 = J.value(u);
  const auto r = armijo_step(u, zero, zero, J0, [&](const ControlSchedule& v) { return J.value(v); }, PncgConfig{});
  CHECK(r.accepted);
  CHECK(r.objective == J0);
}

TEST_CASE("PNCG finds the clipped minimiser of a box quadratic") {
  for (auto rep : {GradientRepresentation::l2, GradientRepresentation::h1}) {
    BoxQuadratic J(40, 10.0);
    PncgConfig cfg;
    cfg.max_iterations = 50;
    cfg.tolerance = 1e-9;
    cfg.representation = rep;
    const auto r = pncg(ControlSchedule(10.0, 40, 7.0, 0.072), J, cfg);
    CHECK(r.iterations <= 50);
    double err = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t m = 0; m <= 40; ++m) {
        err = std::max(err, std::abs(r.controls.channel(c)[m] - J.minimiser(c, m, r.controls.bound(c))));
      }
    }
    INFO("representation " << (rep == GradientRepresentation::l2 ? "l2" : "h1") << ", iterations "
                           << r.iterations << ", converged " << r.converged);
    CHECK(err <= 1e-6);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].objective <= r.trace[k - 1].objective);
  }
}

TEST_CASE("PNCG stops at once from the minimiser") {
  BoxQuadratic J(20, 10.0);
  ControlSchedule u(10.0, 20, 7.0, 0.072);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t m = 0; m <= 20; ++m) u.channel(c)[m] = J.minimiser(c, m, u.bound(c));
  }
  const auto r = pncg(u, J, PncgConfig{});
  CHECK(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("PNCG rejects inadmissible starts and bad settings") {
  BoxQuadratic J(4, 1.0);
  ControlSchedule u(1.0, 4, 7.0, 0.072);
  PncgConfig bad;
  bad.backtracking = 1.0;
  CHECK_THROWS_AS(pncg(u, J, bad), InvalidInput);
  u.channel(0)[0] = -1.0;
  CHECK_THROWS_AS(pncg(u, J, PncgConfig{}), InvalidInput);
}

TEST_CASE("pure regularisation drives the doses to zero") {
  auto s = fixtures::small_scenario(7, 6);
  s.weights.alpha = 0.0;
  s.weights.nu_chemo = 1.0;
  s.weights.nu_immuno = 1.0;
  ControlProblem problem(make_solver(s), make_initial_density(s), make_target(s), s.weights);
  ControlSchedule u0 = zero_schedule(s);
  for (double& v : u0.channel(0)) v = 4.0;
  for (double& v : u0.channel(1)) v = 0.03;
  PncgConfig cfg;
  cfg.representation = GradientRepresentation::l2;
  const auto r = pncg(u0, problem, cfg);
  for (std::size_t c = 0; c < 2; ++c) {
    for (double v : r.controls.channel(c)) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("trace is deterministic") {
  BoxQuadratic J(20, 10.0);
  PncgConfig cfg;
  cfg.max_iterations = 10;
  const auto a = pncg(ControlSchedule(10.0, 20, 7.0, 0.072), J, cfg);
  const auto b = pncg(ControlSchedule(10.0, 20, 7.0, 0.072), J, cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    CHECK(a.trace[k].objective == b.trace[k].objective);
    CHECK(a.trace[k].beta == b.trace[k].beta);
  }
}
