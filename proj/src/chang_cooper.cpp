#include "fpoc/chang_cooper.hpp"

#include <cmath>

namespace fpoc {

double cc_weight(double w) {
  if (std::abs(w) < 1e-4) return 0.5 - w / 12.0 + w * w * w / 720.0;
  return (1.0 - bernoulli(w)) / w;
}

double bernoulli(double w) {
  if (std::abs(w) < 1e-5) return 1.0 - 0.5 * w + w * w / 12.0;
  return w / std::expm1(w);
}

double bernoulli_derivative(double w) {
  if (std::abs(w) < 1e-3) return -0.5 + w / 6.0 - w * w * w / 180.0;
  const double em = std::expm1(w);
  // e^w / (e^w - 1), evaluated without overflow on either side.
  const double ratio = w > 0.0 ? -1.0 / std::expm1(-w) : std::exp(w) / em;
  return (1.0 - w * ratio) / em;
}

FluxCoefficients flux_coefficients(double drift, double diffusion, double h) {
  const double g = diffusion / h;
  const double w = drift / g;
  return {g * bernoulli(w), g * bernoulli(-w)};
}

FluxCoefficients flux_coefficients_drift_derivative(double drift, double diffusion, double h) {
  const double w = drift * h / diffusion;
  return {bernoulli_derivative(w), -bernoulli_derivative(-w)};
}

double face_flux(double f_left, double f_right, double drift, double sigma, double h) {
  const double diffusion = 0.5 * sigma * sigma;
  const double delta = cc_weight(h * drift / diffusion);
  return diffusion * (f_right - f_left) / h - drift * (delta * f_right + (1.0 - delta) * f_left);
}

}  // namespace fpoc
