#include "fpoc/target.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "fpoc/errors.hpp"

namespace fpoc {

GaussianBump make_bump(const Grid4D& grid, const State& center, double variance) {
  if (!(variance > 0.0)) throw InvalidInput("target variance must be positive");
  GaussianBump bump{center, {}};
  for (std::size_t a = 0; a < kDim; ++a) {
    const auto w = grid.weights(a);
    auto& g = bump.factor[a];
    g.resize(grid.points(a));
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = grid.node(a, i) - center[a];
      g[i] = std::exp(-0.5 * d * d / variance);
      sum += w[i] * g[i];
    }
    if (!(sum > 0.0)) {
      throw InvalidInput(fmt::format("Gaussian at {} has no mass on axis {}", center[a], a));
    }
    for (double& v : g) v /= sum;
  }
  return bump;
}

Snapshot GaussianBump::evaluate(const Grid4D& grid) const {
  Snapshot f(grid.size());
  const auto& g0 = factor[0];
  const auto& g1 = factor[1];
  const auto& g2 = factor[2];
  const auto& g3 = factor[3];
  std::size_t idx = 0;
  for (double a : g0)
    for (double b : g1)
      for (double c : g2)
        for (double d : g3) f[idx++] = a * b * c * d;
  return f;
}

Snapshot gaussian_density(const Grid4D& grid, const State& center, double variance) {
  return make_bump(grid, center, variance).evaluate(grid);
}

TargetDensity::TargetDensity(Grid4D grid, double final_time, std::size_t steps,
                             std::vector<double> anchor_times, std::vector<GaussianBump> anchors)
    : grid_(std::move(grid)),
      final_time_(final_time),
      steps_(steps),
      anchor_times_(std::move(anchor_times)),
      anchors_(std::move(anchors)) {
  if (anchor_times_.size() != anchors_.size() || anchors_.size() < 2) {
    throw InvalidInput("target needs at least two anchors with matching times");
  }
  if (steps_ < 1 || !(final_time_ > 0.0)) throw InvalidInput("target time grid is empty");
}

double TargetDensity::time(std::size_t m) const {
  return final_time_ * static_cast<double>(m) / static_cast<double>(steps_);
}

Snapshot TargetDensity::snapshot(std::size_t m) const {
  if (m > steps_) throw InvalidInput(fmt::format("target snapshot {} out of range", m));
  const double t = time(m);
  auto it = std::upper_bound(anchor_times_.begin(), anchor_times_.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - anchor_times_.begin());
  hi = std::clamp<std::size_t>(hi, 1, anchor_times_.size() - 1);
  const std::size_t lo = hi - 1;
  const double span = anchor_times_[hi] - anchor_times_[lo];
  const double lambda = std::clamp((t - anchor_times_[lo]) / span, 0.0, 1.0);

  Snapshot f = anchors_[lo].evaluate(grid_);
  if (lambda > 0.0) {
    const Snapshot g = anchors_[hi].evaluate(grid_);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (1.0 - lambda) * f[i] + lambda * g[i];
  }
  const double mass = total_mass(grid_, f);
  for (double& v : f) v /= mass;
  return f;
}

std::vector<double> TargetDensity::marginal(std::size_t m, std::size_t axis) const {
  return fpoc::marginal(grid_, snapshot(m), axis);
}

TargetDensity build_target(const Trajectory& traj, std::size_t n_anchors, double variance,
                           const Grid4D& grid, double final_time, std::size_t steps) {
  if (n_anchors < 2) throw InvalidInput("at least two target anchors are required");
  if (!(variance > 0.0)) throw InvalidInput("target variance must be positive");
  if (traj.time.empty() || traj.time.back() < final_time * (1.0 - 1e-12)) {
    throw InvalidInput("trajectory does not cover the target horizon");
  }
  std::vector<double> times(n_anchors);
  std::vector<GaussianBump> anchors;
  anchors.reserve(n_anchors);
  for (std::size_t i = 0; i < n_anchors; ++i) {
    times[i] = final_time * static_cast<double>(i) / static_cast<double>(n_anchors - 1);
    const State c = traj.at(times[i]);
    if (!grid.contains(c)) {
      throw InvalidInput(fmt::format("target anchor {} at t={} has centre ({}, {}, {}, {}) outside the domain",
                                     i, times[i], c[0], c[1], c[2], c[3]));
    }
    anchors.push_back(make_bump(grid, c, variance));
  }
  return TargetDensity(grid, final_time, steps, std::move(times), std::move(anchors));
}

void write_target_marginals(const TargetDensity& target, const std::string& path,
                            std::size_t every) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path));
  out << "t,axis,x,density\n";
  const auto& grid = target.grid();
  for (std::size_t m = 0; m <= target.steps(); m += std::max<std::size_t>(every, 1)) {
    const Snapshot f = target.snapshot(m);
    for (std::size_t a = 0; a < kDim; ++a) {
      const auto g = marginal(grid, f, a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        out << fmt::format("{:.17g},{},{:.17g},{:.17g}\n", target.time(m), a, grid.node(a, i), g[i]);
      }
    }
  }
}

}  // namespace fpoc
