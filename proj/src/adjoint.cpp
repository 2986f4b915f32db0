#include "fpoc/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

void ObjectiveWeights::validate() const {
  if (!(alpha >= 0.0) || !(nu_chemo >= 0.0) || !(nu_immuno >= 0.0)) {
    throw InvalidInput("objective weights must be non-negative");
  }
}

namespace {

Snapshot node_weights(const Grid4D& grid) {
  Snapshot W(grid.size());
  const auto w0 = grid.weights(0);
  const auto w1 = grid.weights(1);
  const auto w2 = grid.weights(2);
  const auto w3 = grid.weights(3);
  std::size_t idx = 0;
  for (double a : w0)
    for (double b : w1)
      for (double c : w2)
        for (double d : w3) W[idx++] = a * b * c * d;
  return W;
}

void check_alignment(const Grid4D& grid, std::size_t steps, const TargetDensity& target,
                     const ControlSchedule& u) {
  if (!(grid == target.grid())) throw InvalidInput("density and target live on different grids");
  if (steps != target.steps()) throw InvalidInput("density and target have different time grids");
  if (u.steps() != steps) throw InvalidInput("control schedule and density have different time grids");
}

double control_term(std::span<const double> u, double dt) {
  const auto wt = time_weights(u.size(), dt);
  double acc = 0.0;
  for (std::size_t m = 0; m < u.size(); ++m) acc += wt[m] * u[m] * u[m];
  return acc;
}

double tracking_sum(const Snapshot& W, const Snapshot& f, const Snapshot& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = f[i] - target[i];
    acc += W[i] * d * d;
  }
  return acc;
}

/// lam = alpha wt W (f - f*) + back
void add_mismatch(Snapshot& lam, const Snapshot& back, double scale, const Snapshot& W,
                  const Snapshot& f, const Snapshot& target) {
  lam.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) lam[i] = scale * W[i] * (f[i] - target[i]) + back[i];
}

ControlGradient finish_gradient(const std::array<std::vector<double>, 2>& u_bar,
                                const ControlSchedule& u, const ObjectiveWeights& w) {
  ControlGradient g = ControlGradient::like(u);
  const auto wt = time_weights(u.samples(), u.dt());
  const double nu[2] = {w.nu_chemo, w.nu_immuno};
  for (std::size_t c = 0; c < 2; ++c) {
    const auto uc = u.channel(c);
    for (std::size_t m = 0; m < u.samples(); ++m) {
      g.g[c][m] = (u_bar[c][m] + nu[c] * wt[m] * uc[m]) / wt[m];
    }
  }
  return g;
}

}  // namespace

ObjectiveTerms objective_terms(const DensityField& f, const TargetDensity& target,
                               const ControlSchedule& u, const ObjectiveWeights& w) {
  w.validate();
  check_alignment(f.grid(), f.steps(), target, u);
  const Snapshot W = node_weights(f.grid());
  const auto wt = time_weights(f.steps() + 1, f.time_spec().dt());
  double tracking = 0.0;
  f.for_each([&](std::size_t m, const Snapshot& fm) {
    tracking += wt[m] * tracking_sum(W, fm, target.snapshot(m));
  });
  ObjectiveTerms terms;
  terms.tracking = 0.5 * w.alpha * tracking;
  terms.chemo = 0.5 * w.nu_chemo * control_term(u.channel(0), u.dt());
  terms.immuno = 0.5 * w.nu_immuno * control_term(u.channel(1), u.dt());
  return terms;
}

double objective(const DensityField& f, const TargetDensity& target, const ControlSchedule& u,
                 const ObjectiveWeights& w) {
  return objective_terms(f, target, u, w).total();
}

AdjointField solve_adjoint(const FokkerPlanckSolver& solver, const DensityField& f,
                           const TargetDensity& target, const ControlSchedule& u, double alpha) {
  check_alignment(f.grid(), f.steps(), target, u);
  const std::size_t N = f.steps();
  const Snapshot W = node_weights(f.grid());
  const auto wt = time_weights(N + 1, f.time_spec().dt());
  AdjointField out{f.grid(), std::vector<Snapshot>(N + 1)};
  out.p[N].assign(f.grid().size(), 0.0);
  Snapshot lam_next;
  f.for_each_reverse([&](std::size_t m, const Snapshot& fm) {
    Snapshot back = m == N ? Snapshot(fm.size(), 0.0)
                           : solver.advance_reverse(fm, u, m, lam_next, nullptr);
    if (m > 0) {
      out.p[m - 1].resize(fm.size());
      add_mismatch(out.p[m - 1], back, alpha * wt[m], W, fm, target.snapshot(m));
      lam_next = out.p[m - 1];
    }
  });
  return out;
}

ControlGradient reduced_gradient(const FokkerPlanckSolver& solver, const DensityField& f,
                                 const AdjointField& p, const ControlSchedule& u,
                                 const ObjectiveWeights& w) {
  if (p.steps() != f.steps() || !(p.grid == f.grid())) {
    throw InvalidInput("adjoint and forward fields are not aligned");
  }
  std::array<std::vector<double>, 2> u_bar{std::vector<double>(u.samples(), 0.0),
                                           std::vector<double>(u.samples(), 0.0)};
  f.for_each([&](std::size_t m, const Snapshot& fm) {
    if (m < f.steps()) solver.advance_reverse(fm, u, m, p.p[m], &u_bar);
  });
  return finish_gradient(u_bar, u, w);
}

namespace {

/// Rows of one axis of the continuous adjoint operator at frozen data.
RowFill continuous_rows(const FokkerPlanckSolver& solver, const std::array<Snapshot, kDim>& coef) {
  const Grid4D& grid = solver.grid();
  const double h = grid.h();
  return [&grid, &solver, &coef, h](std::size_t axis, std::size_t line, std::span<double> sub,
                                    std::span<double> diag, std::span<double> sup) {
    const auto& layout = grid.layout();
    const std::size_t start = layout.line_start(axis, line);
    const std::size_t stride = layout.stride(axis);
    const std::size_t n = grid.points(axis);
    const auto w = grid.weights(axis);
    const auto& disp = solver.dispersion();
    for (std::size_t i = 0; i < n; ++i) {
      sub[i] = diag[i] = sup[i] = 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && i + 1 < n) {
        const double c = coef[axis][start + i * stride];
        if (c > 0.0) {
          sup[i] += c / h;
          diag[i] -= c / h;
        } else {
          diag[i] += c / h;
          sub[i] -= c / h;
        }
      }
      if (i + 1 < n) {
        const double sl = disp.sigma(grid.node(axis, i));
        const double sr = disp.sigma(grid.node(axis, i + 1));
        const double D = 0.25 * (sl * sl + sr * sr) / h;
        sup[i] += D / w[i];
        diag[i] -= D / w[i];
        sub[i + 1] += D / w[i + 1];
        diag[i + 1] -= D / w[i + 1];
      }
    }
  };
}

/// Central differences in the interior, zero on the walls.
double gradient_component(const Grid4D& grid, const Snapshot& p, std::size_t idx,
                          const std::array<std::size_t, kDim>& ijkl, std::size_t axis) {
  const std::size_t i = ijkl[axis];
  if (i == 0 || i + 1 == grid.points(axis)) return 0.0;
  const std::size_t stride = grid.layout().stride(axis);
  return (p[idx + stride] - p[idx - stride]) / (2.0 * grid.h());
}

}  // namespace

AdjointField solve_adjoint_continuous(const FokkerPlanckSolver& solver, const DensityField& f,
                                      const TargetDensity& target, const ControlSchedule& u,
                                      double alpha, bool f_weighted_advection) {
  check_alignment(f.grid(), f.steps(), target, u);
  const Grid4D& grid = f.grid();
  const std::size_t N = f.steps();
  const std::size_t S = solver.time_spec().substeps;
  const double dt = f.time_spec().dt() / static_cast<double>(S);
  AdjointField out{grid, std::vector<Snapshot>(N + 1)};
  out.p[N].assign(grid.size(), 0.0);
  std::array<Snapshot, kDim> coef;
  for (auto& c : coef) c.resize(grid.size());
  Snapshot source(grid.size());
  f.for_each_reverse([&](std::size_t m, const Snapshot& fm) {
    if (m == 0) return;
    const auto dose = u.at_sample(m);
    const Snapshot star = target.snapshot(m);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      const Vec4 F = drift(grid.node_state(idx), dose, solver.params());
      const double scale = f_weighted_advection ? fm[idx] : 1.0;
      for (std::size_t a = 0; a < kDim; ++a) coef[a][idx] = scale * F[a];
      source[idx] = -alpha * (fm[idx] - star[idx]);
    }
    const RowFill rows = continuous_rows(solver, coef);
    Snapshot p = out.p[m];
    for (std::size_t s = 0; s < S; ++s) p = solver.stepper().step(rows, p, dt, source);
    out.p[m - 1] = std::move(p);
  });
  return out;
}

ControlGradient continuous_gradient(const FokkerPlanckSolver& solver, const DensityField& f,
                                    const AdjointField& p, const ControlSchedule& u,
                                    const ObjectiveWeights& w) {
  const Grid4D& grid = f.grid();
  const Snapshot W = node_weights(grid);
  ControlGradient g = ControlGradient::like(u);
  f.for_each([&](std::size_t m, const Snapshot& fm) {
    double acc[2] = {0.0, 0.0};
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      const auto ijkl = grid.unravel(idx);
      const auto J = control_jacobian(grid.node_state(idx), solver.params());
      for (std::size_t a = 0; a < kDim; ++a) {
        const double dp = gradient_component(grid, p.p[m], idx, ijkl, a);
        acc[0] += W[idx] * fm[idx] * J[0][a] * dp;
        acc[1] += W[idx] * fm[idx] * J[1][a] * dp;
      }
    }
    g.g[0][m] = w.nu_chemo * u.channel(0)[m] - acc[0];
    g.g[1][m] = w.nu_immuno * u.channel(1)[m] - acc[1];
  });
  return g;
}

ControlProblem::ControlProblem(FokkerPlanckSolver solver, Snapshot f0, TargetDensity target,
                               ObjectiveWeights weights, std::size_t checkpoint_every)
    : solver_(std::move(solver)),
      f0_(std::move(f0)),
      target_(std::move(target)),
      weights_(weights),
      every_(checkpoint_every) {
  weights_.validate();
  if (!(solver_.grid() == target_.grid()) || solver_.time_spec().steps != target_.steps()) {
    throw InvalidInput("target does not match the solver grid");
  }
}

DensityField ControlProblem::forward(const ControlSchedule& u) const {
  return solver_.solve_forward(f0_, u, every_);
}

ObjectiveTerms ControlProblem::terms(const ControlSchedule& u) const {
  return objective_terms(forward(u), target_, u, weights_);
}

double ControlProblem::value(const ControlSchedule& u) const { return terms(u).total(); }

Evaluation ControlProblem::evaluate(const ControlSchedule& u) const {
  const DensityField field = forward(u);
  check_alignment(field.grid(), field.steps(), target_, u);
  const std::size_t N = field.steps();
  const Snapshot W = node_weights(field.grid());
  const auto wt = time_weights(N + 1, field.time_spec().dt());
  const double alpha = weights_.alpha;

  std::array<std::vector<double>, 2> u_bar{std::vector<double>(u.samples(), 0.0),
                                           std::vector<double>(u.samples(), 0.0)};
  // Per-step tracking sums are added in forward order afterwards so that
  // value() and evaluate() agree bit for bit.
  std::vector<double> tracking(N + 1, 0.0);
  Snapshot lam_next;
  Snapshot lam;
  field.for_each_reverse([&](std::size_t m, const Snapshot& fm) {
    const Snapshot star = target_.snapshot(m);
    tracking[m] = tracking_sum(W, fm, star);
    Snapshot back = m == N ? Snapshot(fm.size(), 0.0)
                           : solver_.advance_reverse(fm, u, m, lam_next, &u_bar);
    if (m > 0) {
      add_mismatch(lam, back, alpha * wt[m], W, fm, star);
      lam_next.swap(lam);
    }
  });

  Evaluation out;
  double acc = 0.0;
  for (std::size_t m = 0; m <= N; ++m) acc += wt[m] * tracking[m];
  out.terms.tracking = 0.5 * alpha * acc;
  out.terms.chemo = 0.5 * weights_.nu_chemo * control_term(u.channel(0), u.dt());
  out.terms.immuno = 0.5 * weights_.nu_immuno * control_term(u.channel(1), u.dt());
  out.gradient = finish_gradient(u_bar, u, weights_);
  out.diagnostics = field.diagnostics;
  return out;
}

double ControlProblem::value_and_gradient(const ControlSchedule& u, ControlGradient& g) const {
  Evaluation e = evaluate(u);
  g = std::move(e.gradient);
  return e.terms.total();
}

double GradientCheckReport::max_relative_error() const {
  double err = 0.0;
  for (const auto& e : entries) err = std::max(err, e.relative_error);
  return err;
}

std::string GradientCheckReport::to_text() const {
  std::ostringstream out;
  out << fmt::format("gradient check, eps = {:.3g}\n", epsilon);
  out << "direction  adjoint                  finite_difference        relative_error\n";
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    out << fmt::format("{:<10} {:<24.17g} {:<24.17g} {:.3e}\n", k, e.adjoint, e.finite_difference,
                       e.relative_error);
  }
  out << fmt::format("max relative error {:.3e}\n", max_relative_error());
  return out.str();
}

GradientCheckReport gradient_check(const DifferentiableObjective& problem,
                                   const ControlSchedule& u, std::size_t directions, double eps,
                                   std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidInput("finite-difference step must be positive");
  ControlGradient g;
  problem.value_and_gradient(u, g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GradientCheckReport report;
  report.epsilon = eps;
  for (std::size_t k = 0; k < directions; ++k) {
    ControlGradient psi = ControlGradient::like(u);
    for (std::size_t c = 0; c < 2; ++c)
      for (double& v : psi.g[c]) v = u.bound(c) * unit(rng);
    ControlSchedule plus = u, minus = u;
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t m = 0; m < u.samples(); ++m) {
        plus.channel(c)[m] += eps * psi.g[c][m];
        minus.channel(c)[m] -= eps * psi.g[c][m];
      }
    }
    if (!plus.admissible() || !minus.admissible()) {
      throw InvalidInput("gradient check perturbation leaves the admissible set");
    }
    GradientCheckEntry e;
    e.adjoint = inner_product(g, psi);
    e.finite_difference = (problem.value(plus) - problem.value(minus)) / (2.0 * eps);
    e.relative_error = std::abs(e.adjoint - e.finite_difference) /
                       std::max(std::abs(e.finite_difference), 1e-300);
    report.entries.push_back(e);
  }
  return report;
}

AdjointComparison compare_adjoints(const ControlProblem& problem, const ControlSchedule& u) {
  const auto& solver = problem.solver();
  const DensityField field = problem.forward(u);
  const auto& w = problem.weights();
  const AdjointField p = solve_adjoint(solver, field, problem.target(), u, w.alpha);
  const ControlGradient reference = reduced_gradient(solver, field, p, u, w);
  auto distance = [&](bool weighted) {
    const AdjointField q =
        solve_adjoint_continuous(solver, field, problem.target(), u, w.alpha, weighted);
    ControlGradient d = continuous_gradient(solver, field, q, u, w);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t m = 0; m < d.samples(); ++m) d.g[c][m] -= reference.g[c][m];
    return norm(d) / std::max(norm(reference), 1e-300);
  };
  return {distance(true), distance(false)};
}

}  // namespace fpoc
