#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "symflow/core.hpp"

namespace symflow {

/// Composite Simpson rule with `panels` parabolic panels (2*panels+1 nodes).
/// Signed: a > b gives the negated integral.
template <class F>
double simpson(F&& f, double a, double b, std::size_t panels) {
  if (panels == 0) panels = 1;
  const std::size_t n = 2 * panels;
  const double h = (b - a) / static_cast<double>(n);
  Accumulator acc;
  acc.add(f(a));
  acc.add(f(b));
  for (std::size_t j = 1; j < n; ++j) {
    const double x = a + h * static_cast<double>(j);
    acc.add((j % 2 == 1 ? 4.0 : 2.0) * f(x));
  }
  return acc.total() * (h / 3.0);
}

/// Simpson weights for 2*panels+1 uniformly spaced samples with spacing h.
inline double simpson_samples(std::span<const double> vals, double h) {
  const std::size_t m = vals.size();
  if (m < 3 || m % 2 == 0)
    throw PreconditionError("simpson_samples: need an odd sample count >= 3");
  Accumulator acc;
  acc.add(vals.front());
  acc.add(vals.back());
  for (std::size_t j = 1; j + 1 < m; ++j)
    acc.add((j % 2 == 1 ? 4.0 : 2.0) * vals[j]);
  return acc.total() * (h / 3.0);
}

inline double trapezoid_samples(std::span<const double> vals, double h) {
  if (vals.size() < 2) return 0.0;
  Accumulator acc;
  acc.add(0.5 * vals.front());
  acc.add(0.5 * vals.back());
  for (std::size_t j = 1; j + 1 < vals.size(); ++j) acc.add(vals[j]);
  return acc.total() * h;
}

/// Cumulative trapezoid: out[k] = integral over [0, k*h].
inline std::vector<double> cumulative_trapezoid(std::span<const double> vals,
                                                double h) {
  std::vector<double> out(vals.size(), 0.0);
  Accumulator acc;
  for (std::size_t k = 1; k < vals.size(); ++k) {
    acc.add(0.5 * h * (vals[k - 1] + vals[k]));
    out[k] = acc.total();
  }
  return out;
}

}  // namespace symflow
