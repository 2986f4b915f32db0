#include "fpoc/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

namespace {

void require_finite_nonnegative(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw InvalidInput(fmt::format("parameter '{}' must be finite and non-negative (got {})", name, v));
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidInput(fmt::format("parameter '{}' must be strictly positive (got {})", name, v));
  }
}

}  // namespace

void DimensionalParams::validate() const {
  const std::pair<double, const char*> fields[] = {
      {a, "a"},   {b, "b"},   {c, "c"},         {d, "d"},          {e, "e"},
      {f, "f"},   {p, "p"},   {m, "m"},         {j, "j"},          {k, "k"},
      {q, "q"},   {r1, "r1"}, {r2, "r2"},       {s, "s"},          {l, "l"},
      {alpha, "alpha"},       {beta, "beta"},   {immuno_nk, "beta_N"}, {immuno_cd8, "beta_L"}};
  for (const auto& [v, name] : fields) require_finite_nonnegative(v, name);
  for (std::size_t i = 0; i < kDim; ++i) {
    const std::string name = fmt::format("alpha{}", i + 1);
    require_finite_nonnegative(chemo_kill[i], name.c_str());
  }
  require_positive(b, "b");
  require_positive(k, "k");
  require_positive(s, "s");
}

void ScalingConstants::validate() const {
  require_positive(k1, "k1");
  require_positive(k2, "k2");
  require_positive(k3, "k3");
  require_positive(k4, "k4");
  require_positive(k5, "k5");
}

NonDimParams NonDimParams::with_patient(double d_bar, double l_bar, double s_bar) const {
  if (!(d_bar >= 0.0) || !(l_bar >= 0.0) || !(s_bar > 0.0)) {
    throw InvalidInput(fmt::format("invalid patient triple ({}, {}, {})", d_bar, l_bar, s_bar));
  }
  NonDimParams out = *this;
  out.d = d_bar;
  out.l = l_bar;
  out.s = s_bar;
  return out;
}

NonDimParams nondimensionalize(const DimensionalParams& p, const ScalingConstants& k,
                               KillTermForm form) {
  k.validate();
  NonDimParams q;
  q.a = p.a / k.k5;
  q.b = p.b / k.k1;
  q.c = p.c / (k.k2 * k.k5);
  q.d = p.d / k.k5;
  q.e = p.e * k.k2 / (k.k4 * k.k5);
  q.f = p.f / k.k5;
  q.p = 1e10 * p.p / (k.k1 * k.k5);
  q.m = p.m / k.k5;
  q.j = p.j / k.k5;
  q.k = k.k1 * p.k;
  q.q = 1e8 * p.q / (k.k5 * k.k1);
  q.r1 = p.r1 * k.k3 / (k.k1 * k.k2 * k.k5);
  q.r2 = p.r2 * k.k3 / (k.k1 * k.k4 * k.k5);
  q.s = 250.0 * p.s;
  q.alpha = p.alpha * k.k4 / k.k5;
  q.beta = p.beta / k.k5;
  q.l = p.l;
  for (std::size_t i = 0; i < kDim; ++i) q.chemo_kill[i] = p.chemo_kill[i] / k.k5;
  q.immuno_nk = p.immuno_nk / k.k5;
  q.immuno_cd8 = p.immuno_cd8 / k.k5;
  q.tumor_cd8_scale = k.k1 / k.k3;
  q.kill_form = form;
  return q;
}

DimensionalParams dimensionalize(const NonDimParams& q, const ScalingConstants& k) {
  k.validate();
  DimensionalParams p;
  p.a = q.a * k.k5;
  p.b = q.b * k.k1;
  p.c = q.c * k.k2 * k.k5;
  p.d = q.d * k.k5;
  p.e = q.e * k.k4 * k.k5 / k.k2;
  p.f = q.f * k.k5;
  p.p = q.p * k.k1 * k.k5 * 1e-10;
  p.m = q.m * k.k5;
  p.j = q.j * k.k5;
  p.k = q.k / k.k1;
  p.q = q.q * k.k5 * k.k1 * 1e-8;
  p.r1 = q.r1 * k.k1 * k.k2 * k.k5 / k.k3;
  p.r2 = q.r2 * k.k1 * k.k4 * k.k5 / k.k3;
  p.s = q.s / 250.0;
  p.alpha = q.alpha * k.k5 / k.k4;
  p.beta = q.beta * k.k5;
  p.l = q.l;
  for (std::size_t i = 0; i < kDim; ++i) p.chemo_kill[i] = q.chemo_kill[i] * k.k5;
  p.immuno_nk = q.immuno_nk * k.k5;
  p.immuno_cd8 = q.immuno_cd8 * k.k5;
  return p;
}

double kill_term(double tumor, double cd8, const NonDimParams& q) {
  const double t = std::max(tumor, kTumorFloor);
  const double ratio_pow = std::pow(std::max(cd8, 0.0) / t, q.l);
  const double scale = q.kill_form == KillTermForm::consistent ? 1.0 / q.tumor_cd8_scale
                                                               : q.tumor_cd8_scale;
  const double saturation = 4.0 * q.s * 1e-3 * std::pow(scale, q.l);
  const double denom = saturation + ratio_pow;
  if (denom == 0.0) return 0.0;
  return q.d * ratio_pow / denom;
}

double kill_term_dimensional(double tumor, double cd8, const DimensionalParams& p) {
  const double ratio_pow = std::pow(std::max(cd8, 0.0) / std::max(tumor, kTumorFloor), p.l);
  const double denom = p.s + ratio_pow;
  if (denom == 0.0) return 0.0;
  return p.d * ratio_pow / denom;
}

Vec4 drift_uncontrolled(const State& x, const NonDimParams& q) {
  const double T = x[0], N = x[1], L = x[2], C = x[3];
  const double D = kill_term(T, L, q);
  Vec4 F;
  F[0] = q.a * T - q.a * q.b * T * T - D * T - q.c * N * T;
  F[1] = q.e * C - q.f * N - 1e-10 * q.p * N * T;
  F[2] = q.m * L + q.j * T / (q.k + T) * L - 1e-8 * q.q * L * T + (q.r1 * N + q.r2 * C) * T;
  F[3] = q.alpha - q.beta * C;
  return F;
}

std::array<Vec4, 2> control_jacobian(const State& x, const NonDimParams& q) {
  std::array<Vec4, 2> J{};
  for (std::size_t i = 0; i < kDim; ++i) J[0][i] = -q.chemo_kill[i] * x[i];
  J[1][1] = q.immuno_nk * x[1];
  J[1][2] = q.immuno_cd8 * x[2];
  return J;
}

Vec4 drift(const State& x, std::array<double, 2> u, const NonDimParams& q) {
  Vec4 F = drift_uncontrolled(x, q);
  const auto J = control_jacobian(x, q);
  for (std::size_t i = 0; i < kDim; ++i) F[i] += u[0] * J[0][i] + u[1] * J[1][i];
  return F;
}

double DispersionModel::sigma(double xi) const {
  if (!(xi >= 0.0)) {
    throw InvalidInput(fmt::format("dispersion requires non-negative state (got {})", xi));
  }
  return scale * (std::pow(xi, exponent) + floor);
}

double DispersionModel::sigma_squared_derivative(double xi) const {
  const double s = sigma(xi);
  const double ds = xi > 0.0 ? scale * exponent * std::pow(xi, exponent - 1.0) : 0.0;
  return 2.0 * s * ds;
}

Vec4 DispersionModel::operator()(const State& x) const {
  Vec4 out;
  for (std::size_t i = 0; i < kDim; ++i) out[i] = sigma(x[i]);
  return out;
}

ControlSchedule::ControlSchedule(double final_time, std::size_t steps, double chemo_bound,
                                 double immuno_bound)
    : final_time_(final_time), bounds_{chemo_bound, immuno_bound} {
  if (steps < 1) throw InvalidInput("control schedule needs at least one time step");
  if (!(final_time > 0.0)) throw InvalidInput("control schedule needs a positive horizon");
  if (!(chemo_bound > 0.0) || !(immuno_bound > 0.0)) {
    throw InvalidInput("dose bounds must be strictly positive");
  }
  u_[0].assign(steps + 1, 0.0);
  u_[1].assign(steps + 1, 0.0);
}

std::array<double, 2> ControlSchedule::at(double t) const {
  const double pos = std::clamp(t / dt(), 0.0, static_cast<double>(steps()));
  const auto m = std::min(static_cast<std::size_t>(pos), steps() - 1);
  const double lambda = pos - static_cast<double>(m);
  return {(1.0 - lambda) * u_[0][m] + lambda * u_[0][m + 1],
          (1.0 - lambda) * u_[1][m] + lambda * u_[1][m + 1]};
}

bool ControlSchedule::admissible() const {
  for (std::size_t i = 0; i < 2; ++i) {
    for (double v : u_[i]) {
      if (!(v >= 0.0 && v <= bounds_[i])) return false;
    }
  }
  return true;
}

bool ControlSchedule::same_grid(const ControlSchedule& other) const {
  return samples() == other.samples() && final_time_ == other.final_time_;
}

ControlGradient::ControlGradient(double final_time_, std::size_t samples) : final_time(final_time_) {
  if (samples < 2) throw InvalidInput("a control series needs at least two samples");
  g[0].assign(samples, 0.0);
  g[1].assign(samples, 0.0);
}

ControlGradient ControlGradient::like(const ControlSchedule& u) {
  return ControlGradient(u.final_time(), u.samples());
}

std::vector<double> time_weights(std::size_t samples, double dt) {
  std::vector<double> w(samples, dt);
  w.front() = 0.5 * dt;
  w.back() = 0.5 * dt;
  return w;
}

double inner_product(const ControlGradient& a, const ControlGradient& b) {
  if (a.samples() != b.samples()) throw InvalidInput("control series lengths differ");
  const auto w = time_weights(a.samples(), a.dt());
  double acc = 0.0;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t m = 0; m < w.size(); ++m) acc += w[m] * a.g[c][m] * b.g[c][m];
  }
  return acc;
}

double norm(const ControlGradient& a) { return std::sqrt(inner_product(a, a)); }

}  // namespace fpoc
