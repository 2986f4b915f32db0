#include "fpoc/fp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fpoc/chang_cooper.hpp"
#include "fpoc/errors.hpp"

namespace fpoc {

void TimeSpec::validate() const {
  if (!(final_time > 0.0)) throw InvalidInput("final time must be positive");
  if (steps < 1) throw InvalidInput("at least one time step is required");
  if (substeps < 1) throw InvalidInput("at least one sub-step per interval is required");
}

double ForwardDiagnostics::max_mass_error() const {
  double err = 0.0;
  for (double m : mass) err = std::max(err, std::abs(m - 1.0));
  return err;
}

double ForwardDiagnostics::min_density() const {
  double lo = std::numeric_limits<double>::infinity();
  for (double v : min_value) lo = std::min(lo, v);
  return lo;
}

DensityField::DensityField(Grid4D grid, TimeSpec time, std::size_t checkpoint_every,
                           Advance advance)
    : grid_(std::move(grid)),
      time_(time),
      every_(checkpoint_every),
      stored_(time.steps + 1),
      advance_(std::move(advance)) {
  if (every_ < 1) throw InvalidInput("checkpoint interval must be >= 1");
}

void DensityField::store(std::size_t m, Snapshot f) { stored_.at(m) = std::move(f); }

Snapshot DensityField::snapshot(std::size_t m) const {
  if (m > time_.steps) throw InvalidInput(fmt::format("snapshot index {} out of range", m));
  if (stored(m)) return *stored_[m];
  std::size_t base = m;
  while (!stored(base)) {
    if (base == 0) throw DiagnosticsError("density field has no stored initial snapshot");
    --base;
  }
  if (!advance_) throw DiagnosticsError(fmt::format("snapshot {} missing and cannot be recomputed", m));
  Snapshot f = *stored_[base];
  for (std::size_t k = base; k < m; ++k) f = advance_(f, k);
  return f;
}

void DensityField::for_each(const std::function<void(std::size_t, const Snapshot&)>& fn) const {
  Snapshot f = snapshot(0);
  fn(0, f);
  for (std::size_t m = 1; m <= time_.steps; ++m) {
    if (stored(m)) {
      fn(m, *stored_[m]);
      f = *stored_[m];
    } else {
      f = advance_(f, m - 1);
      fn(m, f);
    }
  }
}

void DensityField::for_each_reverse(
    const std::function<void(std::size_t, const Snapshot&)>& fn) const {
  std::size_t hi = time_.steps;
  while (hi > 0) {
    std::size_t lo = hi - 1;
    while (lo > 0 && !stored(lo)) --lo;
    if (!stored(lo)) throw DiagnosticsError("density field has no stored initial snapshot");
    // Regenerate [lo, hi] once, then hand it out backwards.
    std::vector<Snapshot> block;
    block.reserve(hi - lo + 1);
    block.push_back(*stored_[lo]);
    for (std::size_t k = lo; k < hi; ++k) {
      block.push_back(stored(k + 1) ? *stored_[k + 1] : advance_(block.back(), k));
    }
    for (std::size_t k = hi; k > lo; --k) fn(k, block[k - lo]);
    hi = lo;
  }
  fn(0, snapshot(0));
}

struct FokkerPlanckSolver::Faces {
  // Face-averaged zero-dose drift per axis, line-major ([line * (n - 1) + i]).
  std::array<std::vector<double>, kDim> base;
  // Face values of dF_a/du_c; these depend on x_a only.
  std::array<std::array<std::vector<double>, kDim>, 2> jac;
  // Face diffusion sigma^2 / 2 from the average of the adjacent nodal sigma^2.
  std::array<std::vector<double>, kDim> diffusion;
};

FokkerPlanckSolver::FokkerPlanckSolver(Grid4D grid, NonDimParams params,
                                       DispersionModel dispersion, TimeSpec time)
    : grid_(std::move(grid)),
      params_(params),
      dispersion_(dispersion),
      time_(time),
      stepper_(grid_.layout(), {grid_.h(), grid_.h(), grid_.h(), grid_.h()}) {
  time_.validate();
  const std::size_t size = grid_.size();
  const auto& layout = grid_.layout();
  auto faces = std::make_shared<Faces>();

  std::array<std::vector<double>, kDim> node_drift;
  for (auto& v : node_drift) v.resize(size);
  for (std::size_t idx = 0; idx < size; ++idx) {
    const Vec4 F = drift_uncontrolled(grid_.node_state(idx), params_);
    for (std::size_t a = 0; a < kDim; ++a) node_drift[a][idx] = F[a];
  }

  for (std::size_t a = 0; a < kDim; ++a) {
    const std::size_t n = grid_.points(a);
    const std::size_t stride = layout.stride(a);
    const std::size_t lines = layout.line_count(a);
    faces->base[a].resize(lines * (n - 1));
    for (std::size_t line = 0; line < lines; ++line) {
      const std::size_t start = layout.line_start(a, line);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        faces->base[a][line * (n - 1) + i] =
            0.5 * (node_drift[a][start + i * stride] + node_drift[a][start + (i + 1) * stride]);
      }
    }

    faces->diffusion[a].resize(n - 1);
    faces->jac[0][a].resize(n - 1);
    faces->jac[1][a].resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double xl = grid_.node(a, i), xr = grid_.node(a, i + 1);
      const double sl = dispersion_.sigma(xl), sr = dispersion_.sigma(xr);
      faces->diffusion[a][i] = 0.25 * (sl * sl + sr * sr);
      State node_l, node_r;
      node_l.x.fill(xl);
      node_r.x.fill(xr);
      const auto Jl = control_jacobian(node_l, params_);
      const auto Jr = control_jacobian(node_r, params_);
      for (std::size_t c = 0; c < 2; ++c) faces->jac[c][a][i] = 0.5 * (Jl[c][a] + Jr[c][a]);
    }
  }
  faces_ = std::move(faces);
}

CoefficientFill FokkerPlanckSolver::coefficients(std::array<double, 2> u) const {
  return [this, u](std::size_t axis, std::size_t line, std::span<double> right,
                   std::span<double> left) {
    const std::size_t faces = right.size();
    const double* base = faces_->base[axis].data() + line * faces;
    const auto& j0 = faces_->jac[0][axis];
    const auto& j1 = faces_->jac[1][axis];
    const auto& diff = faces_->diffusion[axis];
    const double h = grid_.h();
    for (std::size_t i = 0; i < faces; ++i) {
      const double F = base[i] + u[0] * j0[i] + u[1] * j1[i];
      const auto c = flux_coefficients(F, diff[i], h);
      right[i] = c.right;
      left[i] = c.left;
    }
  };
}

Snapshot FokkerPlanckSolver::step(const Snapshot& f, std::array<double, 2> u, double dt) const {
  return stepper_.step(coefficients(u), f, dt);
}

std::array<double, 2> FokkerPlanckSolver::substep_control(const ControlSchedule& u, std::size_t m,
                                                          std::size_t s) const {
  const double theta = static_cast<double>(s) / static_cast<double>(time_.substeps);
  const auto lo = u.at_sample(m);
  const auto hi = u.at_sample(m + 1);
  return {(1.0 - theta) * lo[0] + theta * hi[0], (1.0 - theta) * lo[1] + theta * hi[1]};
}

Snapshot FokkerPlanckSolver::advance(const Snapshot& f, const ControlSchedule& u,
                                     std::size_t m) const {
  Snapshot out = f;
  for (std::size_t s = 0; s < time_.substeps; ++s) out = step(out, substep_control(u, m, s), sub_dt());
  return out;
}

Snapshot FokkerPlanckSolver::advance_reverse(const Snapshot& f_m, const ControlSchedule& u,
                                             std::size_t m, const Snapshot& out_bar,
                                             std::array<std::vector<double>, 2>* u_bar) const {
  const std::size_t S = time_.substeps;
  std::vector<Snapshot> states;
  states.reserve(S);
  states.push_back(f_m);
  for (std::size_t s = 0; s + 1 < S; ++s) {
    states.push_back(step(states.back(), substep_control(u, m, s), sub_dt()));
  }

  const auto& layout = grid_.layout();
  std::array<std::vector<std::array<double, 2>>, kDim> partial;
  for (std::size_t a = 0; a < kDim; ++a) partial[a].resize(layout.line_count(a));

  Snapshot bar = out_bar;
  for (std::size_t s = S; s-- > 0;) {
    const auto c = substep_control(u, m, s);
    FaceAdjointSink sink;
    if (u_bar != nullptr) {
      for (auto& p : partial) std::fill(p.begin(), p.end(), std::array<double, 2>{0.0, 0.0});
      sink = [this, &partial, c](std::size_t axis, std::size_t line, std::span<const double> rbar,
                                 std::span<const double> lbar) {
        const std::size_t faces = rbar.size();
        const double* base = faces_->base[axis].data() + line * faces;
        const auto& j0 = faces_->jac[0][axis];
        const auto& j1 = faces_->jac[1][axis];
        const auto& diff = faces_->diffusion[axis];
        double acc0 = 0.0, acc1 = 0.0;
        for (std::size_t i = 0; i < faces; ++i) {
          const double F = base[i] + c[0] * j0[i] + c[1] * j1[i];
          const auto d = flux_coefficients_drift_derivative(F, diff[i], grid_.h());
          const double dF = rbar[i] * d.right + lbar[i] * d.left;
          acc0 += dF * j0[i];
          acc1 += dF * j1[i];
        }
        partial[axis][line] = {acc0, acc1};
      };
    }
    bar = stepper_.step_reverse(coefficients(c), states[s], bar, sub_dt(), sink);
    if (u_bar != nullptr) {
      std::array<double, 2> c_bar{0.0, 0.0};
      for (std::size_t a = 0; a < kDim; ++a) {
        for (const auto& p : partial[a]) {
          c_bar[0] += p[0];
          c_bar[1] += p[1];
        }
      }
      const double theta = static_cast<double>(s) / static_cast<double>(S);
      for (std::size_t ch = 0; ch < 2; ++ch) {
        (*u_bar)[ch][m] += (1.0 - theta) * c_bar[ch];
        (*u_bar)[ch][m + 1] += theta * c_bar[ch];
      }
    }
  }
  return bar;
}

double FokkerPlanckSolver::max_drift(const ControlSchedule& u) const {
  double N = 0.0;
  for (std::size_t idx = 0; idx < grid_.size(); ++idx) {
    const State x = grid_.node_state(idx);
    for (double u1 : {0.0, u.bound(0)}) {
      for (double u2 : {0.0, u.bound(1)}) {
        const Vec4 F = drift(x, {u1, u2}, params_);
        for (double v : F) N = std::max(N, std::abs(v));
      }
    }
  }
  return N;
}

DensityField FokkerPlanckSolver::solve_forward(const Snapshot& f0, const ControlSchedule& u,
                                               std::size_t checkpoint_every) const {
  if (f0.size() != grid_.size()) throw InvalidInput("initial density does not match the grid");
  if (u.steps() != time_.steps || std::abs(u.final_time() - time_.final_time) > 1e-12) {
    throw InvalidInput("control schedule does not match the solver time grid");
  }
  if (!u.admissible()) throw InvalidInput("control schedule is not admissible");
  for (double v : f0) {
    if (!(v >= 0.0)) throw InvalidInput("initial density must be non-negative");
  }
  const double mass0 = total_mass(grid_, f0);
  if (std::abs(mass0 - 1.0) > 1e-8) {
    throw InvalidInput(fmt::format("initial density has mass {}, expected 1", mass0));
  }

  auto self = std::make_shared<const FokkerPlanckSolver>(*this);
  auto schedule = std::make_shared<const ControlSchedule>(u);
  DensityField field(grid_, time_, checkpoint_every,
                     [self, schedule](const Snapshot& f, std::size_t m) {
                       return self->advance(f, *schedule, m);
                     });

  auto& diag = field.diagnostics;
  double sigma_min = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < kDim; ++a) {
    for (std::size_t i = 0; i < grid_.points(a); ++i) {
      sigma_min = std::min(sigma_min, dispersion_.sigma(grid_.node(a, i)));
    }
  }
  const double N = max_drift(u);
  diag.envelope_rate = N * N / (sigma_min * sigma_min);

  auto record = [&](std::size_t m, const Snapshot& f) {
    diag.mass.push_back(total_mass(grid_, f));
    diag.min_value.push_back(*std::min_element(f.begin(), f.end()));
    diag.l2.push_back(l2_norm(grid_, f));
    const double t = field.time(m);
    if (diag.l2.back() > diag.l2.front() * std::exp(diag.envelope_rate * t) * (1.0 + 1e-12)) {
      diag.envelope_exceeded = true;
    }
  };

  record(0, f0);
  field.store(0, f0);
  Snapshot f = f0;
  for (std::size_t m = 0; m < time_.steps; ++m) {
    f = advance(f, u, m);
    record(m + 1, f);
    if (std::abs(diag.mass.back() - mass0) > 1e-8) {
      throw DiagnosticsError(fmt::format("mass drifted to {} at step {}", diag.mass.back(), m + 1));
    }
    if ((m + 1) % checkpoint_every == 0 || m + 1 == time_.steps) field.store(m + 1, f);
  }
  return field;
}

}  // namespace fpoc
