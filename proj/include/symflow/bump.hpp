#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "symflow/core.hpp"
#include "symflow/quadrature.hpp"

namespace symflow {

/// The standard C-infinity bump exp(-1/(1-z^2)) on (-1,1), 0 outside.
/// Below t = 1-z^2 = 1e-3 the value underflows to an exact 0, so we cut
/// there and avoid 0*inf in the derivative.
inline double smooth_bump(double z) {
  const double t = 1.0 - z * z;
  if (t < 1e-3) return 0.0;
  return std::exp(-1.0 / t);
}

inline double smooth_bump_deriv(double z) {
  const double t = 1.0 - z * z;
  if (t < 1e-3) return 0.0;
  return std::exp(-1.0 / t) * (-2.0 * z) / (t * t);
}

namespace detail {

/// Mass of smooth_bump over (-1,1); computed once by quadrature.
inline double bump_mass() {
  static const double m = simpson(smooth_bump, -1.0, 1.0, 4096);
  return m;
}

/// Normalized antiderivative of the bump: 0 at z<=-1, 1 at z>=1, strictly
/// increasing in between. Tabulated cumulative Simpson with cubic Hermite
/// evaluation between knots (derivatives are known analytically).
class SmoothStep {
 public:
  static const SmoothStep& instance() {
    static const SmoothStep s;
    return s;
  }

  double value(double z) const {
    if (z <= -1.0) return 0.0;
    if (z >= 1.0) return 1.0;
    const double u = (z + 1.0) / step_;
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= knots_ - 1) i = knots_ - 2;
    const double z0 = -1.0 + step_ * static_cast<double>(i);
    const double s = (z - z0) / step_;
    const double p0 = prefix_[i], p1 = prefix_[i + 1];
    const double d0 = density(z0) * step_, d1 = density(z0 + step_) * step_;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * d0 +
           (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * d1;
  }

  double derivative(double z) const { return density(z); }

 private:
  SmoothStep() : prefix_(knots_, 0.0) {
    // cumulative Simpson over pairs of half-steps
    Accumulator acc;
    for (std::size_t i = 1; i < knots_; ++i) {
      const double a = -1.0 + step_ * static_cast<double>(i - 1);
      acc.add((step_ / 6.0) * (density(a) + 4.0 * density(a + 0.5 * step_) +
                               density(a + step_)));
      prefix_[i] = acc.total();
    }
    const double total = prefix_.back();
    for (double& p : prefix_) p /= total;
    norm_ = total;
  }

  double density(double z) const { return smooth_bump(z) / norm_; }

  static constexpr std::size_t knots_ = 1025;
  static constexpr double step_ = 2.0 / static_cast<double>(knots_ - 1);
  std::vector<double> prefix_;
  double norm_ = 1.0;
};

}  // namespace detail

/// Compactly supported smooth test function for the weak formulation:
/// phi(x) = smooth_bump((x-c)/w), support exactly [c-w, c+w].
struct TestBump {
  double center = 0.0;
  double half_width = 1.0;

  TestBump() = default;
  TestBump(double c, double w) : center(c), half_width(w) {
    if (!(w > 0.0)) throw ConfigError("TestBump: half-width must be positive");
  }

  double value(double x) const {
    return smooth_bump((x - center) / half_width);
  }
  double deriv(double x) const {
    return smooth_bump_deriv((x - center) / half_width) / half_width;
  }
  double support_lo() const { return center - half_width; }
  double support_hi() const { return center + half_width; }
};

/// Standard mollifier phi_eps(x) = (1/eps) phi(x/eps) with unit mass.
struct Mollifier {
  double eps = 0.1;

  explicit Mollifier(double e) : eps(e) {
    if (!(e > 0.0)) throw ConfigError("Mollifier: eps must be positive");
  }

  double value(double x) const {
    return smooth_bump(x / eps) / (eps * detail::bump_mass());
  }
  double deriv(double x) const {
    return smooth_bump_deriv(x / eps) / (eps * eps * detail::bump_mass());
  }
  double mass(std::size_t panels = 2048) const {
    return simpson([this](double x) { return value(x); }, -eps, eps, panels);
  }
};

/// Smooth cutoff pi_r: 1 on |x|<r, 0 on |x|>2r, monotone transition built
/// from the integrated bump. max |pi_r'| = e^{-1}/(mass/2) / r, about
/// 1.66/r, comfortably under the 4/r budget.
struct Cutoff {
  double r = 1.0;

  explicit Cutoff(double radius) : r(radius) {
    if (!(radius > 0.0)) throw ConfigError("Cutoff: radius must be positive");
  }

  double value(double x) const {
    const double y = std::abs(x) / r;
    if (y <= 1.0) return 1.0;
    if (y >= 2.0) return 0.0;
    // descending transition: map [1,2] onto the step's [-1,1], reversed
    return 1.0 - detail::SmoothStep::instance().value(2.0 * y - 3.0);
  }

  double deriv(double x) const {
    const double y = std::abs(x) / r;
    if (y <= 1.0 || y >= 2.0) return 0.0;
    const double d =
        -2.0 * detail::SmoothStep::instance().derivative(2.0 * y - 3.0) / r;
    return x < 0.0 ? -d : d;
  }

  static double deriv_bound_constant() { return 4.0; }
};

}  // namespace symflow
