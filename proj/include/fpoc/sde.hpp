#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "fpoc/grid.hpp"
#include "fpoc/model.hpp"

namespace fpoc {

/// Draws initial states distributed like a grid density: a node is picked
/// with probability w_i f_i, then the state is jittered uniformly inside the
/// node's control volume.
class DensitySampler {
 public:
  DensitySampler(const Grid4D& grid, std::span<const double> f);
  State sample(std::mt19937_64& rng) const;

 private:
  Grid4D grid_;
  std::vector<double> cdf_;
};

using InitialCondition = std::variant<State, DensitySampler>;

/// Reflected Euler-Maruyama samples. samples[k][p] is path p at times[k].
struct PathEnsemble {
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  std::vector<double> times;
  std::vector<std::vector<State>> samples;
};

/// Seed of the generator that drives path `path`.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

/// Simulates dX = b dt + sigma(X) dW on the grid box with mirror reflection.
/// b is the model drift plus, when `noise_induced_drift` is set, the
/// correction 1/2 d(sigma_i^2)/dx_i that makes the path law match the
/// divergence-form Fokker-Planck operator. Doses follow u (piecewise
/// linear, frozen over each Euler step). Every entry of `observe` must be a
/// multiple of the step size. Throws DivergenceError when a component
/// needs more than 10 reflections in one step.
PathEnsemble simulate_paths(const InitialCondition& x0, const ControlSchedule& u,
                            const NonDimParams& q, const DispersionModel& sigma,
                            const Grid4D& domain, std::size_t n_paths, std::size_t n_steps,
                            std::uint64_t seed, const std::vector<double>& observe,
                            bool noise_induced_drift = true);

/// Histogram over the control volumes of one grid axis, normalised to unit
/// trapezoid mass.
std::vector<double> marginal_histogram(const PathEnsemble& ens, std::size_t t_index,
                                       std::size_t axis, const Grid4D& bins);

/// sum_i w_i |a_i - b_i| over one axis.
double l1_distance(const Grid4D& grid, std::size_t axis, std::span<const double> a,
                   std::span<const double> b);

/// CSV: t, mean and variance per axis, path count, seed.
void write_ensemble_summary(const PathEnsemble& ens, const std::string& path);

}  // namespace fpoc
