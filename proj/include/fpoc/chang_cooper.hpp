#pragma once

namespace fpoc {

/// Chang-Cooper weight delta(w) = 1/w - 1/(e^w - 1), with delta(0) = 1/2.
/// `w` is the cell Peclet number h F / (sigma^2 / 2).
double cc_weight(double w);

/// Bernoulli function B(w) = w / (e^w - 1), B(0) = 1.
double bernoulli(double w);
double bernoulli_derivative(double w);

/// Discrete flux through a face written as H = right * f_right - left * f_left.
/// Both coefficients are non-negative for any drift.
struct FluxCoefficients {
  double right = 0;
  double left = 0;
};

/// Face coefficients for drift F and diffusion coefficient D = sigma^2 / 2
/// (D > 0) on spacing h.
FluxCoefficients flux_coefficients(double drift, double diffusion, double h);

/// d(right)/dF and d(left)/dF at fixed diffusion.
FluxCoefficients flux_coefficients_drift_derivative(double drift, double diffusion, double h);

/// Chang-Cooper approximation of H = (sigma^2/2) df/dx - F f on one face.
double face_flux(double f_left, double f_right, double drift, double sigma, double h);

}  // namespace fpoc
