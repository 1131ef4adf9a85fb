#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace symflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid grids, option ranges, malformed scenario files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by its inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Random-path generation failed (e.g. covariance not factorizable).
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// ODE integration or root polishing produced a non-finite state.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A query point fell outside the tabulated image of the flow.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A kernel width is too small for the grid it must be resolved on.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

namespace detail {

// Error-free transforms (Dekker/Knuth). s + e == a + b exactly.
inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double bv = s - a;
  e = (a - (s - bv)) + (b - bv);
}

inline void two_prod(double a, double b, double& p, double& e) {
  p = a * b;
  e = std::fma(a, b, -p);
}

}  // namespace detail

/// Neumaier-compensated accumulator. Keeps long quadrature and partition
/// sums accurate to a few ulps of the running total instead of growing
/// with the term count.
class Accumulator {
 public:
  void add(double x) {
    double t, e;
    detail::two_sum(sum_, x, t, e);
    comp_ += e;
    sum_ = t;
  }
  void add_product(double a, double b) {
    double p, e;
    detail::two_prod(a, b, p, e);
    add(p);
    comp_ += e;
  }
  double total() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double v) { return std::isfinite(v); });
}

/// Median of a sample; +inf entries are allowed and sort last.
inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return (n % 2 == 1) ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double fraction_satisfying(std::span<const double> xs, double bound) {
  if (xs.empty()) return 0.0;
  std::size_t hits = 0;
  for (double v : xs)
    if (v <= bound) ++hits;
  return static_cast<double>(hits) / static_cast<double>(xs.size());
}

}  // namespace symflow
