#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fpoc/adjoint.hpp"
#include "fpoc/model.hpp"

namespace fpoc {

enum class GradientRepresentation { l2, h1 };

struct PncgConfig {
  std::size_t max_iterations = 200;
  double tolerance = 1e-5;
  double initial_step = 1.0;
  double backtracking = 0.5;
  double sufficient_decrease = 1e-4;
  std::size_t max_backtracks = 40;
  GradientRepresentation representation = GradientRepresentation::h1;
  /// epsilon of the H1 smoothing (I - epsilon d_tt) g_H1 = g_L2.
  double smoothing = 1e-2;

  void validate() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  double step = 0.0;
  double beta = 0.0;
  std::size_t active = 0;
};

struct OptimizationResult {
  ControlSchedule controls;
  std::vector<TraceEntry> trace;
  std::size_t iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Clips every sample to [0, D_i].
ControlSchedule project(const ControlSchedule& u);

/// Number of samples sitting on a bound.
std::size_t active_bounds(const ControlSchedule& u);

/// P[u + alpha d]
ControlSchedule projected_step(const ControlSchedule& u, const ControlGradient& d, double alpha);

/// Hager-Zhang beta with the L2 time inner product:
///   beta = (y - 2 d |y|^2 / d.y) . g_next / d.y
/// Returns 0 when |d.y| < 1e-14 |d| |y|.
double hager_zhang_beta(const ControlGradient& g_next, const ControlGradient& y,
                        const ControlGradient& d);

/// H1 Riesz representative: solves (W + eps K) g_h1 = W g_l2 per channel,
/// with W the trapezoid mass and K the stiffness matrix of the time grid.
ControlGradient smooth_h1(const ControlGradient& g_l2, double eps);

struct ArmijoResult {
  bool accepted = false;
  double step = 0.0;
  std::size_t backtracks = 0;
  ControlSchedule controls;
  double objective = 0.0;
};

/// Backtracking along the projected path: accepts the first
/// alpha = alpha_0 rho^j with J(P[u + alpha d]) <= J(u) + c1 <g, P[u + alpha d] - u>.
/// g is the L2 gradient at u; a positive inner product is capped at zero so
/// accepted steps never increase J.
ArmijoResult armijo_step(const ControlSchedule& u, const ControlGradient& d,
                         const ControlGradient& g, double J_u,
                         const std::function<double(const ControlSchedule&)>& J_eval,
                         const PncgConfig& cfg);

/// Projected nonlinear conjugate gradient. Stops when both
/// |u_{k+1} - u_k| and |P[u - g_L2] - u| are below tolerance, or after
/// max_iterations. A short step with a large projected gradient restarts
/// along -g_L2. A failed line search (after one steepest-descent retry)
/// returns the last accepted iterate with line_search_failed set.
OptimizationResult pncg(const ControlSchedule& u0, const DifferentiableObjective& problem,
                        const PncgConfig& cfg);

/// Trace CSV: k, J, |g|, alpha, beta, active.
void write_trace(const std::vector<TraceEntry>& trace, const std::string& path);

}  // namespace fpoc
