#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "symflow/bump.hpp"
#include "symflow/fields.hpp"
#include "symflow/flow.hpp"
#include "symflow/report.hpp"
#include "symflow/symint.hpp"

namespace symflow {

/// Weak solution u(t, x) = u0(X_t^{-1}(x)) evaluated through the tabulated
/// flow. Point queries go through the interpolated inversion; `value_exact`
/// polishes with fresh solves when solver-level accuracy is wanted.
struct SolutionField {
  FlowField flow;
  InitialDatum u0;

  double value(std::size_t k, double x) const {
    return u0.u0(invert_flow_fast(flow, k, x));
  }
  double value_exact(std::size_t k, double x) const {
    return u0.u0(invert_flow(flow, k, x));
  }
  /// x-range on which u(t_k, .) is evaluable for every k <= k_max.
  std::pair<double, double> evaluable_range(std::size_t k_max) const {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= k_max; ++k) {
      lo = std::max(lo, flow.column(k).front());
      hi = std::min(hi, flow.column(k).back());
    }
    return {lo, hi};
  }
  const NoisePath& path() const { return flow.path; }
  const DriftField& drift() const { return flow.drift; }
};

/// Non-solution probe: the initial datum frozen in time. Fails the weak
/// identity through the noise term, which is what the residual study uses
/// it for.
struct FrozenField {
  InitialDatum u0;

  double value(std::size_t, double x) const { return u0.u0(x); }
  std::pair<double, double> evaluable_range(std::size_t) const {
    return {-std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  }
};

/// Audit the standing assumptions on the inputs, then build the flow and
/// wrap it with the initial datum.
inline SolutionField solve_transport(const InitialDatum& u0,
                                     const DriftField& b, const NoisePath& mu,
                                     const SpaceGrid& grid) {
  audit_datum(u0, grid.x_min, grid.x_max);
  audit_drift(b, 0.0, mu.grid.horizon, grid.x_min, grid.x_max);
  return SolutionField{build_flow(b, mu, grid), u0};
}

struct WeakResidualRow {
  std::size_t n_steps = 0;
  std::uint64_t seed = 0;
  double phi_center = 0.0;
  double phi_width = 0.0;
  double t = 0.0;
  double lhs = 0.0;
  double rhs_initial = 0.0;
  double rhs_drift = 0.0;
  double rhs_noise = 0.0;
  double residual = 0.0;
};

namespace detail {

inline std::size_t panels_for_bump(const TestBump& phi) {
  const double want = 128.0 / std::min(phi.half_width, 1.0);
  return static_cast<std::size_t>(std::min(want, 1024.0));
}

}  // namespace detail

/// All terms of the weak formulation against one test function at several
/// time indices, sharing the per-node quadrature tabulation:
///   lhs            = int u(t,x) phi(x) dx               (Simpson in x)
///   rhs_initial    = int u0(x) phi(x) dx
///   rhs_drift      = int_0^t int u (b phi' + b_x phi) dx ds  (trapezoid in s)
///   rhs_noise      = symmetric integral of s -> int u(s,x) phi'(x) dx
template <class Field>
std::vector<WeakResidualRow> weak_residual_rows(
    const Field& u, const NoisePath& mu, const DriftField& b,
    const InitialDatum& u0, const TestBump& phi,
    std::span<const std::size_t> t_indices) {
  if (t_indices.empty()) return {};
  const TimeGrid& grid = mu.grid;
  const std::size_t k_max =
      *std::max_element(t_indices.begin(), t_indices.end());
  if (k_max > grid.n_steps)
    throw PreconditionError("weak_residual: time index beyond the grid");

  const auto [lo, hi] = u.evaluable_range(k_max);
  if (!(phi.support_lo() >= lo && phi.support_hi() <= hi))
    throw ConfigError(
        "weak_residual: test-function support leaves the evaluable window; "
        "widen the spatial domain");

  const std::size_t panels = detail::panels_for_bump(phi);
  const std::size_t nq = 2 * panels;
  const double hx = (phi.support_hi() - phi.support_lo()) /
                    static_cast<double>(nq);
  std::vector<double> xs(nq + 1), wphi(nq + 1), wphid(nq + 1), wq(nq + 1);
  for (std::size_t j = 0; j <= nq; ++j) {
    xs[j] = phi.support_lo() + hx * static_cast<double>(j);
    wq[j] = (j == 0 || j == nq) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    wq[j] *= hx / 3.0;
    wphi[j] = phi.value(xs[j]);
    wphid[j] = phi.deriv(xs[j]);
  }

  // tabulate the noise and drift coefficients at every node up to k_max
  std::vector<double> xi(k_max + 1), drift_coeff(k_max + 1);
  std::vector<double> lhs_at(grid.n_steps + 1,
                             std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double t = grid.node(k);
    Accumulator noise_acc, drift_acc, lhs_acc;
    for (std::size_t j = 0; j <= nq; ++j) {
      const double uval = u.value(k, xs[j]);
      noise_acc.add(wq[j] * uval * wphid[j]);
      drift_acc.add(wq[j] * uval *
                    (b.b(t, xs[j]) * wphid[j] + b.b_x(t, xs[j]) * wphi[j]));
      lhs_acc.add(wq[j] * uval * wphi[j]);
    }
    xi[k] = noise_acc.total();
    drift_coeff[k] = drift_acc.total();
    lhs_at[k] = lhs_acc.total();
  }
  const std::vector<double> drift_prefix =
      cumulative_trapezoid(drift_coeff, grid.dt());

  Accumulator init_acc;
  for (std::size_t j = 0; j <= nq; ++j)
    init_acc.add(wq[j] * u0.u0(xs[j]) * wphi[j]);
  const double rhs_initial = init_acc.total();

  std::vector<WeakResidualRow> rows;
  for (std::size_t k : t_indices) {
    WeakResidualRow row;
    row.n_steps = grid.n_steps;
    row.seed = mu.seed;
    row.phi_center = phi.center;
    row.phi_width = phi.half_width;
    row.t = grid.node(k);
    row.lhs = lhs_at[k];
    row.rhs_initial = rhs_initial;
    row.rhs_drift = drift_prefix[k];
    row.rhs_noise =
        (k == 0) ? 0.0
                 : symmetric_sum(std::span<const double>(xi).first(k + 1),
                                 std::span<const double>(mu.values)
                                     .first(k + 1));
    row.residual = row.lhs - (row.rhs_initial + row.rhs_drift + row.rhs_noise);
    rows.push_back(row);
  }
  return rows;
}

inline WeakResidualRow weak_residual(const SolutionField& u,
                                     const TestBump& phi,
                                     std::size_t t_index) {
  const std::size_t idx[] = {t_index};
  return weak_residual_rows(u, u.path(), u.drift(), u.u0, phi,
                            std::span<const std::size_t>(idx))
      .front();
}

/// The transported scenario a residual study runs on.
struct TransportScenario {
  DriftField drift;
  InitialDatum initial;
  SpaceGrid space;
  bool frozen_probe = false;  // replace the solution by the frozen field
};

struct ResidualStudy {
  ConvergenceReport report;
  double median_ratio = 0.0;
  std::vector<double> level_max;  // max |residual| per level over all seeds
};

/// Max weak residual over the test battery per refinement level, with
/// consecutive-level decay ratios pooled across seeds.
inline ResidualStudy residual_study(const TransportScenario& scenario,
                                    const RefinementLadder& ladder,
                                    std::span<const TestBump> phis,
                                    std::span<const double> t_fractions,
                                    std::size_t n_seeds = 1) {
  LadderSampler sampler(ladder);
  ResidualStudy study;
  study.report.name = "residual";
  study.report.columns = {"level",       "seed",      "phi_center",
                          "phi_width",   "t",         "lhs",
                          "rhs_initial", "rhs_drift", "rhs_noise",
                          "residual"};
  study.level_max.assign(ladder.levels.size(), 0.0);

  std::vector<double> ratios;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = ladder.base_seed + s;
    const NoisePath fine = sampler.finest_path(seed);
    std::vector<double> per_level;
    for (std::size_t li = 0; li < ladder.levels.size(); ++li) {
      const std::size_t n = ladder.levels[li];
      const NoisePath path = fine.subsample(ladder.finest() / n);
      std::vector<std::size_t> t_indices;
      for (double frac : t_fractions) {
        const double pos = frac * static_cast<double>(n);
        const auto k = static_cast<std::size_t>(std::llround(pos));
        if (std::abs(pos - static_cast<double>(k)) > 1e-9)
          throw ConfigError("residual_study: t fraction not on the grid");
        t_indices.push_back(k);
      }

      double level_worst = 0.0;
      auto ingest = [&](const std::vector<WeakResidualRow>& rows) {
        for (const WeakResidualRow& row : rows) {
          study.report.add_row({static_cast<double>(n),
                                static_cast<double>(seed), row.phi_center,
                                row.phi_width, row.t, row.lhs, row.rhs_initial,
                                row.rhs_drift, row.rhs_noise, row.residual});
          level_worst = std::max(level_worst, std::abs(row.residual));
        }
      };

      if (scenario.frozen_probe) {
        FrozenField field{scenario.initial};
        for (const TestBump& phi : phis)
          ingest(weak_residual_rows(field, path, scenario.drift,
                                    scenario.initial, phi, t_indices));
      } else {
        SolutionField field = solve_transport(scenario.initial, scenario.drift,
                                              path, scenario.space);
        for (const TestBump& phi : phis)
          ingest(weak_residual_rows(field, path, scenario.drift,
                                    scenario.initial, phi, t_indices));
      }
      per_level.push_back(level_worst);
      study.level_max[li] = std::max(study.level_max[li], level_worst);
    }
    for (std::size_t li = 0; li + 1 < per_level.size(); ++li) {
      if (per_level[li + 1] > 1e-15)
        ratios.push_back(per_level[li] / per_level[li + 1]);
      else
        ratios.push_back(std::numeric_limits<double>::infinity());
    }
  }
  study.report.sort_rows();
  study.median_ratio = median(ratios);
  study.report.summary["median_ratio"] = study.median_ratio;
  study.report.summary["estimated_order"] = std::log2(study.median_ratio);
  return study;
}

}  // namespace symflow
