#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "symflow/bump.hpp"
#include "symflow/core.hpp"

namespace symflow {

/// Drift coefficient b(t, x) with its spatial derivative and a Lipschitz
/// bound K >= sup |db/dx|. The exponential-formula bounds on the flow
/// derivative are stated against this K.
struct DriftField {
  std::function<double(double, double)> b;
  std::function<double(double, double)> b_x;
  double lipschitz_bound = 0.0;
  std::string label;
};

// conservative bound on max |d/dz smooth_bump(z)| (true value ~ 0.798)
inline constexpr double kBumpDerivBound = 0.9;

inline DriftField zero_drift() {
  return {[](double, double) { return 0.0; },
          [](double, double) { return 0.0; }, 0.0, "zero"};
}

inline DriftField constant_drift(double c) {
  return {[c](double, double) { return c; },
          [](double, double) { return 0.0; }, 0.0, "constant"};
}

inline DriftField linear_drift(double a) {
  return {[a](double, double x) { return a * x; },
          [a](double, double) { return a; }, std::abs(a), "linear"};
}

/// Compactly supported drift with a gentle time modulation. Satisfies the
/// boundedness and tail assumptions that the uniqueness machinery audits.
inline DriftField bump_drift(double amplitude, double center, double width,
                             double wobble = 1.0) {
  auto factor = [wobble](double t) { return 1.0 + 0.5 * std::sin(wobble * t); };
  auto b = [=](double t, double x) {
    return amplitude * factor(t) * smooth_bump((x - center) / width);
  };
  auto b_x = [=](double t, double x) {
    return amplitude * factor(t) * smooth_bump_deriv((x - center) / width) /
           width;
  };
  const double K = std::abs(amplitude) * 1.5 * kBumpDerivBound / width;
  return {b, b_x, K, "bump"};
}

/// Initial condition u0 with continuous derivative; `bound` is the
/// constant C of the boundedness assumption when known.
struct InitialDatum {
  std::function<double(double)> u0;
  std::function<double(double)> u0_x;
  std::optional<double> bound;
  std::string label;
};

inline InitialDatum zero_datum() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }, 0.0,
          "zero"};
}

inline InitialDatum bump_datum(double amplitude, double center, double width) {
  return {[=](double x) {
            return amplitude * smooth_bump((x - center) / width);
          },
          [=](double x) {
            return amplitude * smooth_bump_deriv((x - center) / width) / width;
          },
          std::abs(amplitude), "bump"};
}

/// Smoothed step rising from 0 to `amplitude` across [center-w, center+w].
inline InitialDatum step_datum(double amplitude, double center, double width) {
  return {[=](double x) {
            return amplitude *
                   detail::SmoothStep::instance().value((x - center) / width);
          },
          [=](double x) {
            return amplitude *
                   detail::SmoothStep::instance().derivative((x - center) /
                                                             width) /
                   width;
          },
          std::abs(amplitude), "step"};
}

/// Finite-difference consistency of b_x with b, plus |b_x| <= K, at probe
/// points spanning the given window.
inline void audit_drift(const DriftField& drift, double t_lo, double t_hi,
                        double x_lo, double x_hi, std::size_t probes = 7) {
  const double h = 1e-6 * std::max(1.0, std::abs(x_hi - x_lo));
  for (std::size_t i = 0; i < probes; ++i)
    for (std::size_t j = 0; j < probes; ++j) {
      const double t = t_lo + (t_hi - t_lo) * (static_cast<double>(j) + 0.5) /
                                  static_cast<double>(probes);
      const double x = x_lo + (x_hi - x_lo) * (static_cast<double>(i) + 0.5) /
                                  static_cast<double>(probes);
      const double fd = (drift.b(t, x + h) - drift.b(t, x - h)) / (2.0 * h);
      const double an = drift.b_x(t, x);
      if (std::abs(fd - an) > 1e-4 * std::max({std::abs(fd), std::abs(an), 1.0}))
        throw PreconditionError("DriftField '" + drift.label +
                                "': b_x inconsistent with b at probes");
      if (std::abs(an) > drift.lipschitz_bound * (1.0 + 1e-9) + 1e-12)
        throw PreconditionError("DriftField '" + drift.label +
                                "': |b_x| exceeds the declared bound");
    }
}

inline void audit_datum(const InitialDatum& datum, double x_lo, double x_hi,
                        std::size_t probes = 9) {
  const double h = 1e-6 * std::max(1.0, std::abs(x_hi - x_lo));
  for (std::size_t i = 0; i < probes; ++i) {
    const double x = x_lo + (x_hi - x_lo) * (static_cast<double>(i) + 0.5) /
                                static_cast<double>(probes);
    const double fd = (datum.u0(x + h) - datum.u0(x - h)) / (2.0 * h);
    const double an = datum.u0_x(x);
    if (std::abs(fd - an) > 1e-4 * std::max({std::abs(fd), std::abs(an), 1.0}))
      throw PreconditionError("InitialDatum '" + datum.label +
                              "': u0_x inconsistent with u0 at probes");
    if (datum.bound &&
        std::abs(datum.u0(x)) > *datum.bound * (1.0 + 1e-9) + 1e-12)
      throw PreconditionError("InitialDatum '" + datum.label +
                              "': |u0| exceeds the declared bound");
  }
}

}  // namespace symflow
