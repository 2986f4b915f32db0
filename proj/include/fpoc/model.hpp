#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fpoc {

inline constexpr std::size_t kDim = 4;

/// Population state (T, N, L, C) in non-dimensional units.
struct State {
  std::array<double, kDim> x{};

  double& operator[](std::size_t i) { return x[i]; }
  double operator[](std::size_t i) const { return x[i]; }

  double tumor() const { return x[0]; }
  double nk() const { return x[1]; }
  double cd8() const { return x[2]; }
  double lymphocytes() const { return x[3]; }
};

using Vec4 = std::array<double, kDim>;

/// Dimensional coefficients of the tumor/immune model. Units follow the
/// cell-count/day convention of the underlying de Pillis model family.
struct DimensionalParams {
  double a = 0;  ///< tumor growth rate (1/day)
  double b = 0;  ///< inverse carrying capacity (1/cells)
  double c = 0;  ///< NK kill rate
  double d = 0;  ///< maximal CD8+ kill rate
  double e = 0;
  double f = 0;
  double p = 0;
  double m = 0;
  double j = 0;
  double k = 0;
  double q = 0;
  double r1 = 0;
  double r2 = 0;
  double s = 0;
  double l = 0;
  double alpha = 0;  ///< lymphocyte source
  double beta = 0;   ///< lymphocyte death
  std::array<double, kDim> chemo_kill{};  ///< alpha_1..alpha_4
  double immuno_nk = 0;   ///< IL-2 boost on the N equation
  double immuno_cd8 = 0;  ///< IL-2 boost on the L equation

  void validate() const;
};

/// Scale factors: T' = k1 T, N' = k2 N, L' = k3 L, C' = k4 C, t = k5 tau.
struct ScalingConstants {
  double k1 = 1, k2 = 1, k3 = 1, k4 = 1, k5 = 1;

  void validate() const;
};

/// How the CD8+ kill fraction is evaluated in non-dimensional variables.
///
/// `consistent` is the exact image of d (L/T)^l / (s + (L/T)^l) under the
/// scaling map, i.e. the saturation constant carries (k3/k1)^l. `printed`
/// uses (k1/k3)^l in that place; the two differ unless k1 = k3.
enum class KillTermForm { consistent, printed };

struct NonDimParams {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0, p = 0, m = 0, j = 0, k = 0, q = 0;
  double r1 = 0, r2 = 0, s = 0, l = 0, alpha = 0, beta = 0;
  std::array<double, kDim> chemo_kill{};
  double immuno_nk = 0;
  double immuno_cd8 = 0;
  double tumor_cd8_scale = 1;  ///< k1 / k3, enters the kill term
  KillTermForm kill_form = KillTermForm::consistent;

  /// Replace the patient-specific immune triple (d, l, s).
  NonDimParams with_patient(double d_bar, double l_bar, double s_bar) const;
};

NonDimParams nondimensionalize(const DimensionalParams& p, const ScalingConstants& k,
                               KillTermForm form = KillTermForm::consistent);

/// Inverse of nondimensionalize for a fixed set of scaling constants.
DimensionalParams dimensionalize(const NonDimParams& q, const ScalingConstants& k);

/// Floor applied to T before forming L/T in the kill term.
inline constexpr double kTumorFloor = 1e-12;

/// CD8+ mediated kill fraction, in [0, d].
double kill_term(double tumor, double cd8, const NonDimParams& q);

/// Dimensional kill fraction d (L/T)^l / (s + (L/T)^l).
double kill_term_dimensional(double tumor, double cd8, const DimensionalParams& p);

/// Drift of the non-dimensional model for doses u = (chemo, immuno).
Vec4 drift(const State& x, std::array<double, 2> u, const NonDimParams& q);

/// Drift at zero dose.
Vec4 drift_uncontrolled(const State& x, const NonDimParams& q);

/// dF/du_1 and dF/du_2. The drift is affine in the doses, so
/// drift(x, u) = drift_uncontrolled(x) + u1 * J[0] + u2 * J[1].
std::array<Vec4, 2> control_jacobian(const State& x, const NonDimParams& q);

/// sigma_i(x) = scale * (x_i^exponent + floor), one entry per axis.
struct DispersionModel {
  double scale = 0.5;
  double exponent = 1.2;
  double floor = 0.001;

  double sigma(double xi) const;
  /// d(sigma^2)/dx_i; used for the noise-induced drift of the path oracle.
  double sigma_squared_derivative(double xi) const;
  Vec4 operator()(const State& x) const;
};

/// Dose series sampled on a uniform time grid over [0, final_time].
class ControlSchedule {
 public:
  ControlSchedule() = default;
  ControlSchedule(double final_time, std::size_t steps, double chemo_bound, double immuno_bound);

  std::size_t steps() const { return u_[0].size() - 1; }
  std::size_t samples() const { return u_[0].size(); }
  double final_time() const { return final_time_; }
  double dt() const { return final_time_ / static_cast<double>(steps()); }
  double time(std::size_t m) const { return dt() * static_cast<double>(m); }

  std::span<double> channel(std::size_t i) { return u_[i]; }
  std::span<const double> channel(std::size_t i) const { return u_[i]; }
  double bound(std::size_t i) const { return bounds_[i]; }

  std::array<double, 2> at_sample(std::size_t m) const { return {u_[0][m], u_[1][m]}; }
  /// Piecewise-linear value at time t (clamped to the horizon).
  std::array<double, 2> at(double t) const;

  bool admissible() const;
  bool same_grid(const ControlSchedule& other) const;

 private:
  double final_time_ = 0;
  std::array<std::vector<double>, 2> u_;
  std::array<double, 2> bounds_{};
};

/// Two series on the sample grid of a ControlSchedule; used for gradients
/// and search directions.
struct ControlGradient {
  double final_time = 0;
  std::array<std::vector<double>, 2> g;

  ControlGradient() = default;
  ControlGradient(double final_time, std::size_t samples);
  /// Zero series on the grid of u.
  static ControlGradient like(const ControlSchedule& u);

  std::size_t samples() const { return g[0].size(); }
  double dt() const { return final_time / static_cast<double>(samples() - 1); }
};

/// Trapezoid weights of the sample grid (dt, with dt/2 at both ends).
std::vector<double> time_weights(std::size_t samples, double dt);

/// Trapezoidal L2(0, T) inner product summed over both channels.
double inner_product(const ControlGradient& a, const ControlGradient& b);
double norm(const ControlGradient& a);

}  // namespace fpoc
