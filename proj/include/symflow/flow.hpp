#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "symflow/core.hpp"
#include "symflow/fields.hpp"
#include "symflow/grid.hpp"
#include "symflow/noise.hpp"
#include "symflow/quadrature.hpp"

namespace symflow {

namespace detail {

/// One RK4 step of Y' = b(t, Y + mu(t)) across a path interval; mu is
/// linearly interpolated, so its midpoint value is the node average.
inline double rk4_step(const DriftField& b, double t, double h, double y,
                       double mu_lo, double mu_hi) {
  const double mu_mid = 0.5 * (mu_lo + mu_hi);
  const double k1 = b.b(t, y + mu_lo);
  const double k2 = b.b(t + 0.5 * h, y + 0.5 * h * k1 + mu_mid);
  const double k3 = b.b(t + 0.5 * h, y + 0.5 * h * k2 + mu_mid);
  const double k4 = b.b(t + h, y + h * k3 + mu_hi);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Tabulated characteristic flow X_t(x) and its spatial derivative on a
/// space-time grid. Owns copies of the drift and the driving path so the
/// strict inversion can re-solve trajectories on demand.
struct FlowField {
  SpaceGrid space;
  DriftField drift;
  NoisePath path;
  std::vector<double> X;   // (n_t+1) x n_x, row-major
  std::vector<double> Xp;  // same shape; empty until flow_derivative runs

  std::size_t n_times() const { return path.grid.n_steps; }
  std::size_t n_x() const { return space.n_points; }

  double x(std::size_t k, std::size_t i) const {
    return X[k * n_x() + i];
  }
  double xp(std::size_t k, std::size_t i) const {
    return Xp[k * n_x() + i];
  }
  std::span<const double> column(std::size_t k) const {
    return std::span<const double>(X).subspan(k * n_x(), n_x());
  }
  std::span<const double> deriv_column(std::size_t k) const {
    if (Xp.empty()) return {};
    return std::span<const double>(Xp).subspan(k * n_x(), n_x());
  }
};

/// Trajectory of a single starting point under the same stepping as
/// solve_flow; index k of the result is X_{t_k}(x0).
inline std::vector<double> solve_flow_point(const DriftField& b,
                                            const NoisePath& mu, double x0,
                                            std::size_t k_end) {
  const TimeGrid& grid = mu.grid;
  if (k_end > grid.n_steps)
    throw PreconditionError("solve_flow_point: time index out of range");
  std::vector<double> traj(k_end + 1);
  double y = x0;
  traj[0] = x0;
  const double h = grid.dt();
  for (std::size_t k = 0; k < k_end; ++k) {
    y = detail::rk4_step(b, grid.node(k), h, y, mu.values[k],
                         mu.values[k + 1]);
    traj[k + 1] = y + mu.values[k + 1];
    if (!std::isfinite(traj[k + 1]))
      throw SolverError("solve_flow_point: non-finite state at step " +
                        std::to_string(k + 1));
  }
  return traj;
}

/// Pathwise solve of X_t(x) = x + int_0^t b(r, X_r(x)) dr + mu_t for every
/// grid column, via Y = X - mu and one RK4 step per path interval.
/// Monotonicity in x is checked exhaustively as rows are produced.
inline FlowField solve_flow(const DriftField& b, const NoisePath& mu,
                            const SpaceGrid& grid) {
  mu.validate();
  grid.validate();
  FlowField flow;
  flow.space = grid;
  flow.drift = b;
  flow.path = mu;
  const std::size_t nt = mu.grid.n_steps;
  const std::size_t nx = grid.n_points;
  flow.X.resize((nt + 1) * nx);

  std::vector<double> y(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    y[i] = grid.node(i);
    flow.X[i] = y[i];
  }
  const double h = mu.grid.dt();
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = mu.grid.node(k);
    double* row = flow.X.data() + (k + 1) * nx;
    for (std::size_t i = 0; i < nx; ++i) {
      y[i] = detail::rk4_step(b, t, h, y[i], mu.values[k], mu.values[k + 1]);
      row[i] = y[i] + mu.values[k + 1];
      if (!std::isfinite(row[i]))
        throw SolverError("solve_flow: non-finite state at (k=" +
                          std::to_string(k + 1) + ", i=" + std::to_string(i) +
                          ")");
      if (i > 0 && !(row[i] > row[i - 1]))
        throw SolverError("solve_flow: monotonicity lost at (k=" +
                          std::to_string(k + 1) + ", i=" + std::to_string(i) +
                          ")");
    }
  }
  return flow;
}

/// X'_t(x) by the exponential formula: exp of the trapezoid-rule time
/// integral of b_x along each computed trajectory. Positive by
/// construction and bounded by exp(±K t) when |b_x| <= K.
inline void flow_derivative(const DriftField& b, FlowField& flow) {
  const std::size_t nt = flow.n_times();
  const std::size_t nx = flow.n_x();
  flow.Xp.assign((nt + 1) * nx, 1.0);
  const double h = flow.path.grid.dt();
  std::vector<double> integral(nx, 0.0);
  std::vector<double> prev(nx), cur(nx);
  for (std::size_t i = 0; i < nx; ++i)
    prev[i] = b.b_x(0.0, flow.x(0, i));
  for (std::size_t k = 1; k <= nt; ++k) {
    const double t = flow.path.grid.node(k);
    for (std::size_t i = 0; i < nx; ++i) {
      cur[i] = b.b_x(t, flow.x(k, i));
      integral[i] += 0.5 * h * (prev[i] + cur[i]);
      flow.Xp[k * nx + i] = std::exp(integral[i]);
    }
    std::swap(prev, cur);
  }
}

inline FlowField build_flow(const DriftField& b, const NoisePath& mu,
                            const SpaceGrid& grid) {
  FlowField flow = solve_flow(b, mu, grid);
  flow_derivative(b, flow);
  return flow;
}

namespace detail {

/// Invert the monotone cubic Hermite interpolant of a tabulated column.
/// Accuracy is tied to the spatial grid (O(dx^4) for smooth flows); the
/// strict inversion below polishes this with fresh solves.
inline double hermite_invert(const FlowField& flow, std::size_t k, double y) {
  const auto col = flow.column(k);
  const auto der = flow.deriv_column(k);
  if (!(y >= col.front() && y <= col.back()))
    throw RangeError("invert_flow: value " + std::to_string(y) +
                     " outside the tabulated image [" +
                     std::to_string(col.front()) + ", " +
                     std::to_string(col.back()) +
                     "]; widen the spatial domain");
  auto it = std::upper_bound(col.begin(), col.end(), y);
  std::size_t i = (it == col.begin())
                      ? 0
                      : static_cast<std::size_t>(it - col.begin()) - 1;
  if (i >= col.size() - 1) i = col.size() - 2;

  const double dx = flow.space.dx();
  const double x0 = flow.space.node(i);
  const double f0 = col[i], f1 = col[i + 1];
  const double d0 = der.empty() ? (f1 - f0) / dx : der[i];
  const double d1 = der.empty() ? (f1 - f0) / dx : der[i + 1];

  auto eval = [&](double s, double& value, double& slope) {
    const double s2 = s * s, s3 = s2 * s;
    value = (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * dx * d0 +
            (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * dx * d1;
    slope = (6 * s2 - 6 * s) * f0 + (3 * s2 - 4 * s + 1) * dx * d0 +
            (-6 * s2 + 6 * s) * f1 + (3 * s2 - 2 * s) * dx * d1;
  };

  double lo = 0.0, hi = 1.0;
  double s = (f1 > f0) ? (y - f0) / (f1 - f0) : 0.5;
  for (int iter = 0; iter < 60; ++iter) {
    double value, slope;
    eval(s, value, slope);
    const double resid = value - y;
    if (std::abs(resid) <= 1e-15 * (1.0 + std::abs(y))) break;
    if (resid > 0.0)
      hi = s;
    else
      lo = s;
    const double step = (slope > 0.0) ? resid / slope : 0.0;
    double next = s - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s) break;
    s = next;
  }
  return x0 + s * dx;
}

}  // namespace detail

/// Monotone inversion of the flow at time index k: bracket on the
/// tabulated column, Newton with the interpolated derivative, polished by
/// fresh RK solves until |X_{t_k}(x*) - y| <= 1e-10 (1 + |y|).
inline double invert_flow(const FlowField& flow, std::size_t k, double y) {
  if (k > flow.n_times())
    throw PreconditionError("invert_flow: time index out of range");
  double x = detail::hermite_invert(flow, k, y);  // also range-checks y
  if (k == 0) return y;

  const double tol = 1e-10 * (1.0 + std::abs(y));
  double lo = flow.space.x_min, hi = flow.space.x_max;
  for (int iter = 0; iter < 80; ++iter) {
    const double value = solve_flow_point(flow.drift, flow.path, x, k).back();
    const double resid = value - y;
    if (std::abs(resid) <= tol) return x;
    if (resid > 0.0)
      hi = x;
    else
      lo = x;
    // slope from the tabulated derivative, clamped away from zero
    const auto der = flow.deriv_column(k);
    double slope = 1.0;
    if (!der.empty()) {
      const double u = (x - flow.space.x_min) / flow.space.dx();
      std::size_t i = std::min(static_cast<std::size_t>(std::max(u, 0.0)),
                               flow.space.n_points - 2);
      const double s = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
      slope = (1.0 - s) * der[i] + s * der[i + 1];
    }
    slope = std::max(slope, 1e-12);
    double next = x - resid / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  throw SolverError("invert_flow: polish failed to reach tolerance at k=" +
                    std::to_string(k));
}

/// Interpolation-level inversion used in quadrature-heavy evaluation paths
/// where solver-level polish per point would be prohibitive.
inline double invert_flow_fast(const FlowField& flow, std::size_t k,
                               double y) {
  if (k == 0) {
    const auto col = flow.column(0);
    if (!(y >= col.front() && y <= col.back()))
      throw RangeError("invert_flow_fast: value outside the image range");
    return y;
  }
  return detail::hermite_invert(flow, k, y);
}

struct TailAuditReport {
  std::vector<double> r_values;
  std::vector<double> integrals;  // sup over grid times of the tail integral
  bool decays = false;
};

/// Numerical probe of the tail assumption: for each r, the sup over grid
/// times of int_{r<=|x|<=10r} |b(t,x)|/(1+|x|) dx. The decay flag records
/// whether the values shrink to <= 10% of the first.
inline TailAuditReport audit_tail_condition(const DriftField& b,
                                            std::span<const double> r_values,
                                            const TimeGrid& grid) {
  TailAuditReport rep;
  rep.r_values.assign(r_values.begin(), r_values.end());
  const std::size_t t_probes = std::min<std::size_t>(grid.n_steps, 32);
  for (double r : r_values) {
    if (!(r > 0.0)) throw PreconditionError("audit_tail_condition: r <= 0");
    double sup = 0.0;
    for (std::size_t j = 0; j <= t_probes; ++j) {
      const double t =
          grid.horizon * static_cast<double>(j) / static_cast<double>(t_probes);
      auto integrand = [&](double x) {
        return std::abs(b.b(t, x)) / (1.0 + std::abs(x));
      };
      const std::size_t panels =
          std::max<std::size_t>(256, static_cast<std::size_t>(16.0 * r));
      const double val = simpson(integrand, r, 10.0 * r, panels) +
                         simpson(integrand, -10.0 * r, -r, panels);
      sup = std::max(sup, val);
    }
    rep.integrals.push_back(sup);
  }

  bool non_increasing = true;
  for (std::size_t i = 0; i + 1 < rep.integrals.size(); ++i)
    if (rep.integrals[i + 1] > rep.integrals[i] + 1e-12) non_increasing = false;
  const double first = rep.integrals.empty() ? 0.0 : rep.integrals.front();
  const double last = rep.integrals.empty() ? 0.0 : rep.integrals.back();
  rep.decays = non_increasing && (first <= 1e-14 || last <= 0.1 * first);
  return rep;
}

}  // namespace symflow
