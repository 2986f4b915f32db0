#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fpoc/fp_solver.hpp"
#include "fpoc/target.hpp"

namespace fpoc {

/// Weights of J = alpha/2 ||f - f*||^2 + nu_1/2 ||u_1||^2 + nu_2/2 ||u_2||^2.
struct ObjectiveWeights {
  double alpha = 1.0;
  double nu_chemo = 0.01;
  double nu_immuno = 0.01;

  void validate() const;
};

struct ObjectiveTerms {
  double tracking = 0.0;
  double chemo = 0.0;
  double immuno = 0.0;

  double total() const { return tracking + chemo + immuno; }
};

/// Trapezoidal space-time quadrature of the objective.
ObjectiveTerms objective_terms(const DensityField& f, const TargetDensity& target,
                               const ControlSchedule& u, const ObjectiveWeights& w);
double objective(const DensityField& f, const TargetDensity& target, const ControlSchedule& u,
                 const ObjectiveWeights& w);

/// Adjoint snapshots p_0..p_N on the forward time grid; p_N = 0.
struct AdjointField {
  Grid4D grid;
  std::vector<Snapshot> p;

  std::size_t steps() const { return p.size() - 1; }
};

/// Discrete adjoint of the implemented forward scheme:
///   p_N = 0,  p_{m-1} = alpha wt_m W (f_m - f*_m) + Phi_m^T p_m
/// where Phi_m advances f_m to f_{m+1}, W holds the spatial quadrature
/// weights and wt the temporal ones.
AdjointField solve_adjoint(const FokkerPlanckSolver& solver, const DensityField& f,
                           const TargetDensity& target, const ControlSchedule& u, double alpha);

/// L2(0, T) representation of dJ/du from a discrete adjoint field.
ControlGradient reduced_gradient(const FokkerPlanckSolver& solver, const DensityField& f,
                                 const AdjointField& p, const ControlSchedule& u,
                                 const ObjectiveWeights& w);

/// Continuous adjoint equation
///   -p_t - c F.grad p - 1/2 div(sigma^2 grad p) = -alpha (f - f*),  p(T) = 0,
/// with c = f (as printed) or c = 1, homogeneous Neumann walls, upwind
/// advection, centred diffusion and Douglas-Gunn stepping backwards in time.
AdjointField solve_adjoint_continuous(const FokkerPlanckSolver& solver, const DensityField& f,
                                      const TargetDensity& target, const ControlSchedule& u,
                                      double alpha, bool f_weighted_advection);

/// g_c(t) = nu_c u_c(t) - int f dF/du_c . grad p dx for a continuous adjoint.
ControlGradient continuous_gradient(const FokkerPlanckSolver& solver, const DensityField& f,
                                    const AdjointField& p, const ControlSchedule& u,
                                    const ObjectiveWeights& w);

/// Objective with an L2 gradient.
class DifferentiableObjective {
 public:
  virtual ~DifferentiableObjective() = default;
  virtual double value(const ControlSchedule& u) const = 0;
  virtual double value_and_gradient(const ControlSchedule& u, ControlGradient& g) const = 0;
};

struct Evaluation {
  ObjectiveTerms terms;
  ControlGradient gradient;
  ForwardDiagnostics diagnostics;
};

/// Reduced problem u -> J(f(u), u) for a fixed solver, initial density and
/// target. The gradient pass regenerates forward snapshots from checkpoints
/// and never stores the adjoint history.
class ControlProblem : public DifferentiableObjective {
 public:
  ControlProblem(FokkerPlanckSolver solver, Snapshot f0, TargetDensity target,
                 ObjectiveWeights weights, std::size_t checkpoint_every = 1);

  const FokkerPlanckSolver& solver() const { return solver_; }
  const Snapshot& initial_density() const { return f0_; }
  const TargetDensity& target() const { return target_; }
  const ObjectiveWeights& weights() const { return weights_; }

  DensityField forward(const ControlSchedule& u) const;
  ObjectiveTerms terms(const ControlSchedule& u) const;
  Evaluation evaluate(const ControlSchedule& u) const;

  double value(const ControlSchedule& u) const override;
  double value_and_gradient(const ControlSchedule& u, ControlGradient& g) const override;

 private:
  FokkerPlanckSolver solver_;
  Snapshot f0_;
  TargetDensity target_;
  ObjectiveWeights weights_;
  std::size_t every_;
};

struct GradientCheckEntry {
  double adjoint = 0.0;
  double finite_difference = 0.0;
  double relative_error = 0.0;
};

struct GradientCheckReport {
  double epsilon = 0.0;
  std::vector<GradientCheckEntry> entries;

  double max_relative_error() const;
  std::string to_text() const;
};

/// Compares <g, psi> with (J(u + eps psi) - J(u - eps psi)) / (2 eps) for
/// `directions` random directions scaled per channel by the dose bounds.
/// u must stay admissible under both perturbations.
GradientCheckReport gradient_check(const DifferentiableObjective& problem,
                                   const ControlSchedule& u, std::size_t directions, double eps,
                                   std::uint64_t seed);

/// Relative L2 distance of continuous-adjoint gradients to the discrete one.
struct AdjointComparison {
  double printed = 0.0;    // advection weighted by f
  double unweighted = 0.0;  // advection without the f factor
};
AdjointComparison compare_adjoints(const ControlProblem& problem, const ControlSchedule& u);

}  // namespace fpoc
