#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "symflow/core.hpp"

namespace symflow {

/// Uniform partition 0 = t_0 < t_1 < ... < t_n = T. Refining by a factor
/// of two keeps every coarse node, which is what all the nested-refinement
/// studies rely on.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, std::size_t n) : horizon(T), n_steps(n) { validate(); }

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw ConfigError("TimeGrid: horizon must be positive, got " +
                        std::to_string(horizon));
    if (n_steps < 1) throw ConfigError("TimeGrid: n_steps must be >= 1");
  }

  double dt() const { return horizon / static_cast<double>(n_steps); }

  // node(n_steps) == horizon exactly: k/n evaluates to 1.0.
  double node(std::size_t k) const {
    return horizon * (static_cast<double>(k) / static_cast<double>(n_steps));
  }

  std::vector<double> nodes() const {
    std::vector<double> ts(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) ts[k] = node(k);
    return ts;
  }

  TimeGrid refined(std::size_t factor) const {
    return TimeGrid(horizon, n_steps * factor);
  }

  bool operator==(const TimeGrid& other) const {
    return horizon == other.horizon && n_steps == other.n_steps;
  }
};

/// Uniform spatial nodes on [x_min, x_max].
struct SpaceGrid {
  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t n_points = 801;

  SpaceGrid() = default;
  SpaceGrid(double lo, double hi, std::size_t n)
      : x_min(lo), x_max(hi), n_points(n) {
    validate();
  }

  static SpaceGrid symmetric(double half_width, std::size_t n) {
    return SpaceGrid(-half_width, half_width, n);
  }

  void validate() const {
    if (!(x_min < x_max))
      throw ConfigError("SpaceGrid: x_min must be below x_max");
    if (n_points < 2) throw ConfigError("SpaceGrid: need at least 2 points");
  }

  double dx() const {
    return (x_max - x_min) / static_cast<double>(n_points - 1);
  }

  double node(std::size_t i) const {
    const double s =
        static_cast<double>(i) / static_cast<double>(n_points - 1);
    return x_min + (x_max - x_min) * s;
  }

  std::vector<double> nodes() const {
    std::vector<double> xs(n_points);
    for (std::size_t i = 0; i < n_points; ++i) xs[i] = node(i);
    return xs;
  }
};

}  // namespace symflow
