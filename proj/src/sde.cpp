#include "fpoc/sde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mirror reflection into [lo, hi]; false if 10 reflections do not suffice.
bool reflect(double& x, double lo, double hi) {
  for (int k = 0; k <= 10; ++k) {
    if (x < lo) {
      x = 2.0 * lo - x;
    } else if (x > hi) {
      x = 2.0 * hi - x;
    } else {
      return true;
    }
  }
  return false;
}

std::size_t bin_of(const Grid4D& grid, std::size_t axis, double x) {
  const double s = (x - grid.lower(axis)) / grid.h() + 0.5;
  const double last = static_cast<double>(grid.points(axis) - 1);
  return static_cast<std::size_t>(std::clamp(std::floor(s), 0.0, last));
}

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
  return splitmix64(splitmix64(seed) ^ path);
}

DensitySampler::DensitySampler(const Grid4D& grid, std::span<const double> f) : grid_(grid) {
  if (f.size() != grid.size()) throw InvalidInput("sampler density does not match the grid");
  cdf_.resize(f.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] >= 0.0)) throw InvalidInput("sampler density must be non-negative");
    acc += grid.weight(i) * f[i];
    cdf_[i] = acc;
  }
  if (!(acc > 0.0)) throw InvalidInput("sampler density has zero mass");
  for (double& c : cdf_) c /= acc;
}

State DensitySampler::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = unit(rng);
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), r);
  const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  const auto ijkl = grid_.unravel(idx);
  State x;
  const double h = grid_.h();
  for (std::size_t a = 0; a < kDim; ++a) {
    const double c = grid_.node(a, ijkl[a]);
    const double lo = std::max(grid_.lower(a), c - 0.5 * h);
    const double hi = std::min(grid_.upper(a), c + 0.5 * h);
    x[a] = lo + (hi - lo) * unit(rng);
  }
  return x;
}

PathEnsemble simulate_paths(const InitialCondition& x0, const ControlSchedule& u,
                            const NonDimParams& q, const DispersionModel& sigma,
                            const Grid4D& domain, std::size_t n_paths, std::size_t n_steps,
                            std::uint64_t seed, const std::vector<double>& observe,
                            bool noise_induced_drift) {
  if (n_paths < 1) throw InvalidInput("at least one path is required");
  if (n_steps < 1) throw InvalidInput("at least one Euler step is required");
  const double T = u.final_time();
  const double dt = T / static_cast<double>(n_steps);
  const double sqdt = std::sqrt(dt);

  // Map observation times to step indices.
  std::vector<std::size_t> obs_step(observe.size());
  for (std::size_t k = 0; k < observe.size(); ++k) {
    const double s = observe[k] / dt;
    const double r = std::round(s);
    if (r < 0.0 || r > static_cast<double>(n_steps) || std::abs(s - r) > 1e-9 * std::max(1.0, s)) {
      throw InvalidInput(fmt::format("observation time {} is not on the Euler grid", observe[k]));
    }
    obs_step[k] = static_cast<std::size_t>(r);
  }
  if (const State* p = std::get_if<State>(&x0); p != nullptr && !domain.contains(*p)) {
    throw InvalidInput("initial state lies outside the domain");
  }

  PathEnsemble ens;
  ens.seed = seed;
  ens.paths = n_paths;
  ens.times = observe;
  ens.samples.assign(observe.size(), std::vector<State>(n_paths));

  // Doses per step, shared by all paths.
  std::vector<std::array<double, 2>> dose(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) dose[k] = u.at(dt * static_cast<double>(k));

  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < n_paths; ++p) {
    try {
      std::mt19937_64 rng(path_seed(seed, p));
      std::normal_distribution<double> normal(0.0, 1.0);
      State x = std::holds_alternative<State>(x0) ? std::get<State>(x0)
                                                  : std::get<DensitySampler>(x0).sample(rng);
      auto record = [&](std::size_t step) {
        for (std::size_t k = 0; k < obs_step.size(); ++k) {
          if (obs_step[k] == step) ens.samples[k][p] = x;
        }
      };
      record(0);
      for (std::size_t k = 0; k < n_steps; ++k) {
        const Vec4 F = drift(x, dose[k], q);
        State next = x;
        for (std::size_t a = 0; a < kDim; ++a) {
          double b = F[a];
          if (noise_induced_drift) b += 0.5 * sigma.sigma_squared_derivative(x[a]);
          next[a] = x[a] + b * dt + sigma.sigma(x[a]) * sqdt * normal(rng);
          if (!std::isfinite(next[a])) {
            throw DivergenceError(dt * static_cast<double>(k), "non-finite path state");
          }
          if (!reflect(next[a], domain.lower(a), domain.upper(a))) {
            throw DivergenceError(dt * static_cast<double>(k),
                                  fmt::format("reflection did not terminate on axis {}; "
                                              "the Euler step is too large for sigma",
                                              a));
          }
        }
        x = next;
        record(k + 1);
      }
    } catch (...) {
#pragma omp critical(fpoc_path_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return ens;
}

std::vector<double> marginal_histogram(const PathEnsemble& ens, std::size_t t_index,
                                       std::size_t axis, const Grid4D& bins) {
  if (ens.paths == 0) throw InvalidInput("empty path ensemble");
  if (t_index >= ens.samples.size()) throw InvalidInput("observation index out of range");
  if (axis >= kDim) throw InvalidInput("axis out of range");
  std::vector<double> hist(bins.points(axis), 0.0);
  for (const State& x : ens.samples[t_index]) hist[bin_of(bins, axis, x[axis])] += 1.0;
  const auto w = bins.weights(axis);
  for (std::size_t i = 0; i < hist.size(); ++i) hist[i] /= static_cast<double>(ens.paths) * w[i];
  return hist;
}

double l1_distance(const Grid4D& grid, std::size_t axis, std::span<const double> a,
                   std::span<const double> b) {
  const auto w = grid.weights(axis);
  if (a.size() != w.size() || b.size() != w.size()) throw InvalidInput("marginal size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * std::abs(a[i] - b[i]);
  return acc;
}

void write_ensemble_summary(const PathEnsemble& ens, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path));
  out << "t,mean_T,mean_N,mean_L,mean_C,var_T,var_N,var_L,var_C,paths,seed\n";
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    std::array<double, kDim> mean{}, var{};
    for (const State& x : ens.samples[k])
      for (std::size_t a = 0; a < kDim; ++a) mean[a] += x[a];
    for (double& m : mean) m /= static_cast<double>(ens.paths);
    for (const State& x : ens.samples[k])
      for (std::size_t a = 0; a < kDim; ++a) var[a] += (x[a] - mean[a]) * (x[a] - mean[a]);
    for (double& v : var) v /= static_cast<double>(std::max<std::size_t>(ens.paths - 1, 1));
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n",
                       ens.times[k], mean[0], mean[1], mean[2], mean[3], var[0], var[1], var[2],
                       var[3], ens.paths, ens.seed);
  }
}

}  // namespace fpoc
