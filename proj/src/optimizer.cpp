#include "fpoc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

void PncgConfig::validate() const {
  if (max_iterations < 1) throw InvalidInput("optimizer needs at least one iteration");
  if (!(tolerance > 0.0)) throw InvalidInput("optimizer tolerance must be positive");
  if (!(initial_step > 0.0)) throw InvalidInput("initial step must be positive");
  if (!(backtracking > 0.0 && backtracking < 1.0)) throw InvalidInput("backtracking factor must lie in (0, 1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
    throw InvalidInput("sufficient decrease constant must lie in (0, 1)");
  }
  if (!(smoothing > 0.0)) throw InvalidInput("smoothing parameter must be positive");
}

ControlSchedule project(const ControlSchedule& u) {
  ControlSchedule out = u;
  for (std::size_t c = 0; c < 2; ++c) {
    for (double& v : out.channel(c)) v = std::clamp(v, 0.0, u.bound(c));
  }
  return out;
}

std::size_t active_bounds(const ControlSchedule& u) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    for (double v : u.channel(c)) n += (v <= 0.0 || v >= u.bound(c)) ? 1 : 0;
  }
  return n;
}

ControlSchedule projected_step(const ControlSchedule& u, const ControlGradient& d, double alpha) {
  ControlSchedule out = u;
  for (std::size_t c = 0; c < 2; ++c) {
    auto ch = out.channel(c);
    for (std::size_t m = 0; m < ch.size(); ++m) ch[m] += alpha * d.g[c][m];
  }
  return project(out);
}

namespace {

ControlGradient difference(const ControlSchedule& a, const ControlSchedule& b) {
  ControlGradient d = ControlGradient::like(a);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t m = 0; m < a.samples(); ++m) d.g[c][m] = a.channel(c)[m] - b.channel(c)[m];
  }
  return d;
}

ControlGradient combine(double a, const ControlGradient& x, double b, const ControlGradient& y) {
  ControlGradient out = x;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t m = 0; m < x.samples(); ++m) out.g[c][m] = a * x.g[c][m] + b * y.g[c][m];
  }
  return out;
}

}  // namespace

double hager_zhang_beta(const ControlGradient& g_next, const ControlGradient& y,
                        const ControlGradient& d) {
  const double dy = inner_product(d, y);
  const double yy = inner_product(y, y);
  if (!(std::abs(dy) >= 1e-14 * norm(d) * std::sqrt(yy)) || dy == 0.0) return 0.0;
  const double yg = inner_product(y, g_next);
  const double dg = inner_product(d, g_next);
  return (yg - 2.0 * yy / dy * dg) / dy;
}

ControlGradient smooth_h1(const ControlGradient& g_l2, double eps) {
  const std::size_t n = g_l2.samples();
  const double dt = g_l2.dt();
  const auto w = time_weights(n, dt);
  // Tridiagonal W + eps K; K has 1/dt off the diagonal with Neumann ends.
  std::vector<double> sub(n), diag(n), sup(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double left = m > 0 ? eps / dt : 0.0;
    const double right = m + 1 < n ? eps / dt : 0.0;
    sub[m] = -left;
    sup[m] = -right;
    diag[m] = w[m] + left + right;
  }
  ControlGradient out = g_l2;
  std::vector<double> c(n), x(n);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const auto& g = g_l2.g[ch];
    double pivot = diag[0];
    c[0] = sup[0] / pivot;
    x[0] = w[0] * g[0] / pivot;
    for (std::size_t m = 1; m < n; ++m) {
      pivot = diag[m] - sub[m] * c[m - 1];
      c[m] = sup[m] / pivot;
      x[m] = (w[m] * g[m] - sub[m] * x[m - 1]) / pivot;
    }
    for (std::size_t m = n - 1; m-- > 0;) x[m] -= c[m] * x[m + 1];
    out.g[ch] = x;
  }
  return out;
}

ArmijoResult armijo_step(const ControlSchedule& u, const ControlGradient& d,
                         const ControlGradient& g, double J_u,
                         const std::function<double(const ControlSchedule&)>& J_eval,
                         const PncgConfig& cfg) {
  ArmijoResult r;
  double alpha = cfg.initial_step;
  for (std::size_t j = 0; j <= cfg.max_backtracks; ++j) {
    ControlSchedule trial = projected_step(u, d, alpha);
    const double slope = std::min(inner_product(g, difference(trial, u)), 0.0);
    const double J = J_eval(trial);
    if (std::isfinite(J) && J <= J_u + cfg.sufficient_decrease * slope) {
      r.accepted = true;
      r.step = alpha;
      r.backtracks = j;
      r.controls = std::move(trial);
      r.objective = J;
      return r;
    }
    alpha *= cfg.backtracking;
  }
  r.backtracks = cfg.max_backtracks;
  r.controls = u;
  r.objective = J_u;
  return r;
}

OptimizationResult pncg(const ControlSchedule& u0, const DifferentiableObjective& problem,
                        const PncgConfig& cfg) {
  cfg.validate();
  if (!u0.admissible()) throw InvalidInput("initial controls are not admissible");
  auto represent = [&](const ControlGradient& g) {
    return cfg.representation == GradientRepresentation::h1 ? smooth_h1(g, cfg.smoothing) : g;
  };
  const auto J_eval = [&](const ControlSchedule& u) { return problem.value(u); };

  OptimizationResult result;
  ControlSchedule u = u0;
  ControlGradient g_l2;
  double J = problem.value_and_gradient(u, g_l2);
  ControlGradient g = represent(g_l2);
  ControlGradient d = combine(-1.0, g, 0.0, g);
  result.trace.push_back({0, J, norm(g), 0.0, 0.0, active_bounds(u)});

  for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
    // Projected-path descent test at the trial step; fall back to -g.
    auto ascent = [&](const ControlGradient& dir) {
      return inner_product(g_l2, difference(projected_step(u, dir, cfg.initial_step), u)) > 0.0;
    };
    bool steepest = false;
    if (ascent(d)) d = combine(-1.0, g, 0.0, g);
    if (ascent(d)) {
      d = combine(-1.0, g_l2, 0.0, g_l2);
      steepest = true;
    }
    ArmijoResult ls = armijo_step(u, d, g_l2, J, J_eval, cfg);
    if (!ls.accepted && !steepest) {
      // Restart along the plain L2 steepest descent before giving up.
      d = combine(-1.0, g_l2, 0.0, g_l2);
      ls = armijo_step(u, d, g_l2, J, J_eval, cfg);
    }
    if (!ls.accepted) {
      result.line_search_failed = true;
      break;
    }
    const double step_norm = norm(difference(ls.controls, u));
    ControlGradient g_next_l2;
    const double J_next = problem.value_and_gradient(ls.controls, g_next_l2);
    const ControlGradient g_next = represent(g_next_l2);
    const ControlGradient y = combine(1.0, g_next, -1.0, g);
    const double beta = hager_zhang_beta(g_next, y, d);
    d = combine(-1.0, g_next, beta, d);

    u = std::move(ls.controls);
    J = J_next;
    g = g_next;
    g_l2 = std::move(g_next_l2);
    result.iterations = k + 1;
    result.trace.push_back({k + 1, J, norm(g), ls.step, beta, active_bounds(u)});
    if (step_norm < cfg.tolerance) {
      // A short step in a smoothed metric need not be stationary; accept
      // only when the projected L2 gradient step is short as well.
      if (norm(difference(projected_step(u, g_l2, -1.0), u)) < cfg.tolerance) {
        result.converged = true;
        break;
      }
      d = combine(-1.0, g_l2, 0.0, g_l2);
    }
  }
  result.controls = std::move(u);
  return result;
}

void write_trace(const std::vector<TraceEntry>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path));
  out << "k,J,grad_norm,alpha,beta,active\n";
  for (const auto& e : trace) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", e.iteration, e.objective,
                       e.gradient_norm, e.step, e.beta, e.active);
  }
}

}  // namespace fpoc
