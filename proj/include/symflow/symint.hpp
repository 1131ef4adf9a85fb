#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symflow/core.hpp"
#include "symflow/noise.hpp"
#include "symflow/quadrature.hpp"
#include "symflow/report.hpp"

namespace symflow {

/// Midpoint partition sum sum_k (xi_{k-1}+xi_k)/2 * (mu_k - mu_{k-1}) on
/// the path's own grid. No limit is taken here; refinement is the
/// caller's job. Terms are decomposed with error-free transforms so the
/// algebraic telescoping identities (xi == 1, xi == mu) hold to the last
/// bit even when mu_T is small.
inline double symmetric_sum(std::span<const double> xi,
                            std::span<const double> mu_values) {
  if (xi.size() != mu_values.size())
    throw PreconditionError("symmetric_sum: xi and path length mismatch");
  if (xi.size() < 2)
    throw PreconditionError("symmetric_sum: need at least two nodes");
  if (!all_finite(xi) || !all_finite(mu_values))
    throw PreconditionError("symmetric_sum: non-finite input");

  Accumulator acc;
  for (std::size_t k = 1; k < xi.size(); ++k) {
    double s, se, d, de;
    detail::two_sum(xi[k - 1], xi[k], s, se);
    detail::two_sum(mu_values[k], -mu_values[k - 1], d, de);
    acc.add_product(0.5 * s, d);
    acc.add_product(0.5 * s, de);
    acc.add_product(0.5 * se, d);
    acc.add_product(0.5 * se, de);
  }
  return acc.total();
}

inline double symmetric_sum(std::span<const double> xi, const NoisePath& mu) {
  return symmetric_sum(xi, std::span<const double>(mu.values));
}

/// Integrand f(y, t) of class C^{1,1} with its partial derivatives.
struct Integrand {
  std::function<double(double, double)> f;
  std::function<double(double, double)> f_y;
  std::function<double(double, double)> f_t;
  std::string label;
};

/// Parametrized integrand f(y, t, x) for the Fubini interchange, with
/// optional dominating bounds g, g1, g2 (functions of x) for the
/// precondition audit.
struct ParamIntegrand {
  std::function<double(double, double, double)> f;
  std::function<double(double, double, double)> f_y;
  std::function<double(double, double, double)> f_t;
  std::function<double(double)> g;   // |f|   <= g(x), optional
  std::function<double(double)> g1;  // |f_y| <= g1(x), optional
  std::function<double(double)> g2;  // |f_t| <= g2(x), optional
  std::string label;
};

namespace detail {

inline void check_close(double got, double want, double rel_tol, double floor,
                        const std::string& what) {
  const double scale = std::max({std::abs(got), std::abs(want), floor});
  if (std::abs(got - want) > rel_tol * scale)
    throw PreconditionError(what + ": finite-difference mismatch (" +
                            std::to_string(got) + " vs " +
                            std::to_string(want) + ")");
}

}  // namespace detail

/// Probe-point consistency of the declared partials with central
/// differences of f. Catches wired-up-wrong derivative fields early.
inline void audit_integrand(const Integrand& f, double y_lo, double y_hi,
                            double t_lo, double t_hi,
                            std::size_t probes = 5) {
  const double hy = 1e-6 * std::max(1.0, std::abs(y_hi - y_lo));
  const double ht = 1e-6 * std::max(1.0, std::abs(t_hi - t_lo));
  for (std::size_t i = 0; i < probes; ++i)
    for (std::size_t j = 0; j < probes; ++j) {
      const double y = y_lo + (y_hi - y_lo) * (static_cast<double>(i) + 0.5) /
                                  static_cast<double>(probes);
      const double t = t_lo + (t_hi - t_lo) * (static_cast<double>(j) + 0.5) /
                                  static_cast<double>(probes);
      detail::check_close(f.f_y(y, t),
                          (f.f(y + hy, t) - f.f(y - hy, t)) / (2.0 * hy),
                          1e-4, 1.0, "Integrand '" + f.label + "' f_y");
      detail::check_close(f.f_t(y, t),
                          (f.f(y, t + ht) - f.f(y, t - ht)) / (2.0 * ht),
                          1e-4, 1.0, "Integrand '" + f.label + "' f_t");
    }
}

namespace detail {

inline std::size_t panels_for_span(double z) {
  const double scaled = 16.0 * std::abs(z);
  std::size_t p = 64;
  if (scaled > 64.0) p = static_cast<std::size_t>(std::ceil(scaled));
  return p;
}

}  // namespace detail

/// F(z, v) = int_0^z f(y, v) dy by composite Simpson, panel count scaled
/// to |z| with a floor of 64. Signed for z < 0.
inline double antiderivative(const std::function<double(double, double)>& f,
                             double z, double v) {
  if (z == 0.0) return 0.0;
  const double val = simpson([&](double y) { return f(y, v); }, 0.0, z,
                             detail::panels_for_span(z));
  if (!std::isfinite(val))
    throw PreconditionError("antiderivative: non-finite integrand value");
  return val;
}

inline double antiderivative(const Integrand& f, double z, double v) {
  return antiderivative(f.f, z, v);
}

/// Right-hand side of the chain rule: F(mu_T, T) minus the trapezoid-rule
/// time integral of dF/dt(mu_t, t) = int_0^{mu_t} f_t(y, t) dy over the
/// path grid. With the midpoint sum on the left this is the identity the
/// refinement studies drive to zero.
inline double chain_rule_rhs(const Integrand& f, const NoisePath& mu) {
  mu.validate();
  const TimeGrid& grid = mu.grid;
  std::vector<double> ft_int(grid.n_steps + 1);
  for (std::size_t k = 0; k <= grid.n_steps; ++k)
    ft_int[k] = antiderivative(f.f_t, mu.values[k], grid.node(k));
  const double terminal = antiderivative(f.f, mu.terminal(), grid.horizon);
  return terminal - trapezoid_samples(ft_int, grid.dt());
}

/// Tabulate f(mu_t, t) on the path grid and take the midpoint sum.
inline double symmetric_integral(const Integrand& f, const NoisePath& mu) {
  std::vector<double> xi(mu.values.size());
  for (std::size_t k = 0; k < xi.size(); ++k)
    xi[k] = f.f(mu.values[k], mu.grid.node(k));
  return symmetric_sum(xi, mu);
}

/// Doubling ladder of grid sizes sharing one underlying realization per
/// seed: the finest path is generated once and coarser levels subsample it.
struct RefinementLadder {
  std::vector<std::size_t> levels;
  std::uint64_t base_seed = 1;
  NoiseKind kind = NoiseKind::wiener;
  double hurst = 0.75;
  double horizon = 1.0;
  std::function<double(double)> deterministic_g;  // for kind == deterministic

  void validate() const {
    if (levels.size() < 3)
      throw ConfigError("RefinementLadder: need at least 3 levels");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
      if (levels[i + 1] != 2 * levels[i])
        throw ConfigError("RefinementLadder: levels must double");
    if (levels.front() == 0) throw ConfigError("RefinementLadder: level 0");
    if (kind == NoiseKind::deterministic && !deterministic_g)
      throw ConfigError("RefinementLadder: deterministic kind needs g");
  }

  std::size_t finest() const { return levels.back(); }
};

/// Generates finest-level paths for a ladder; covariance kinds factor the
/// covariance matrix once and reuse it across seeds.
class LadderSampler {
 public:
  explicit LadderSampler(const RefinementLadder& ladder) : ladder_(ladder) {
    ladder_.validate();
    if (ladder_.kind == NoiseKind::fbm || ladder_.kind == NoiseKind::sub_fbm) {
      NoiseSpec spec{ladder_.kind, ladder_.hurst, ladder_.horizon,
                     ladder_.finest(), 0};
      sampler_ = std::make_unique<GaussianCovSampler>(spec);
    }
  }

  NoisePath finest_path(std::uint64_t seed) const {
    switch (ladder_.kind) {
      case NoiseKind::wiener: {
        NoiseSpec spec{NoiseKind::wiener, 0.5, ladder_.horizon,
                       ladder_.finest(), seed};
        return sample_wiener(spec);
      }
      case NoiseKind::fbm:
      case NoiseKind::sub_fbm:
        return sampler_->sample(seed);
      case NoiseKind::deterministic:
        return deterministic_path(ladder_.deterministic_g,
                                  TimeGrid(ladder_.horizon, ladder_.finest()));
    }
    throw PreconditionError("LadderSampler: unknown kind");
  }

  const RefinementLadder& ladder() const { return ladder_; }

 private:
  RefinementLadder ladder_;
  std::unique_ptr<GaussianCovSampler> sampler_;
};

struct ChainRuleStudy {
  ConvergenceReport report;         // level,n_steps,seed,lhs,rhs,abs_error
  double median_ratio = 0.0;        // consecutive-level error ratios
  double final_pass_fraction = 0.0; // seeds with finest error <= final_tol
};

/// Single-omega nested refinement of the chain rule: per seed, compare the
/// midpoint sum against the antiderivative form on each subsampled level
/// of one finest-grid path.
inline ChainRuleStudy chain_rule_study(const Integrand& f,
                                       const RefinementLadder& ladder,
                                       std::size_t n_seeds = 1,
                                       double final_tol = 1e-2) {
  LadderSampler sampler(ladder);
  ChainRuleStudy study;
  study.report.name = "chain_rule";
  study.report.columns = {"level", "n_steps", "seed", "lhs", "rhs",
                          "abs_error"};

  std::vector<double> ratios;
  std::vector<double> final_errors;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = ladder.base_seed + s;
    const NoisePath fine = sampler.finest_path(seed);
    std::vector<double> errors;
    for (std::size_t li = 0; li < ladder.levels.size(); ++li) {
      const std::size_t n = ladder.levels[li];
      const NoisePath path = fine.subsample(ladder.finest() / n);
      const double lhs = symmetric_integral(f, path);
      const double rhs = chain_rule_rhs(f, path);
      const double err = std::abs(lhs - rhs);
      errors.push_back(err);
      study.report.add_row({static_cast<double>(li), static_cast<double>(n),
                            static_cast<double>(seed), lhs, rhs, err});
    }
    for (std::size_t li = 0; li + 1 < errors.size(); ++li) {
      // an error already at rounding level counts as converged
      if (errors[li + 1] > 1e-14 * std::max(1.0, std::abs(errors[li])))
        ratios.push_back(errors[li] / errors[li + 1]);
      else
        ratios.push_back(std::numeric_limits<double>::infinity());
    }
    final_errors.push_back(errors.back());
  }

  study.report.sort_rows();
  study.median_ratio = median(ratios);
  study.final_pass_fraction = fraction_satisfying(final_errors, final_tol);
  study.report.summary["median_ratio"] = study.median_ratio;
  study.report.summary["quantile_pass_fraction"] = study.final_pass_fraction;
  study.report.summary["estimated_order"] = std::log2(study.median_ratio);
  return study;
}

struct XQuadSpec {
  double half_width = 10.0;  // integrate x over [-L, L]
  std::size_t panels = 256;  // Simpson panels (2*panels+1 nodes)
};

struct FubiniResult {
  double lhs = 0.0;  // integral over x of the symmetric integral
  double rhs = 0.0;  // symmetric integral of the x-integrated coefficient
  bool truncation_warning = false;
};

/// Both orderings of Eq.-style iterated integration, computed through
/// genuinely different code paths over the same partition and quadrature.
inline FubiniResult fubini_check(const ParamIntegrand& f, const NoisePath& mu,
                                 const XQuadSpec& quad = {}) {
  mu.validate();
  const TimeGrid& grid = mu.grid;
  const std::size_t nx = 2 * quad.panels;
  const double hx = 2.0 * quad.half_width / static_cast<double>(nx);

  // dominating-bound audit at probe points, when hints are given
  if (f.g) {
    const std::size_t stride = std::max<std::size_t>(1, grid.n_steps / 8);
    for (std::size_t k = 0; k <= grid.n_steps; k += stride)
      for (std::size_t i = 0; i <= nx; i += std::max<std::size_t>(1, nx / 8)) {
        const double x = -quad.half_width + hx * static_cast<double>(i);
        const double y = mu.values[k];
        const double t = grid.node(k);
        if (std::abs(f.f(y, t, x)) > f.g(x) * (1.0 + 1e-9) + 1e-12)
          throw PreconditionError("fubini_check: |f| exceeds dominating g");
        if (f.g1 && f.f_y &&
            std::abs(f.f_y(y, t, x)) > f.g1(x) * (1.0 + 1e-9) + 1e-12)
          throw PreconditionError("fubini_check: |f_y| exceeds g1");
        if (f.g2 && f.f_t &&
            std::abs(f.f_t(y, t, x)) > f.g2(x) * (1.0 + 1e-9) + 1e-12)
          throw PreconditionError("fubini_check: |f_t| exceeds g2");
      }
  }

  FubiniResult res;
  double max_abs = 0.0, boundary_abs = 0.0;

  // lhs: symmetric integral at each x node, then Simpson in x
  {
    Accumulator acc;
    std::vector<double> xi(grid.n_steps + 1);
    for (std::size_t i = 0; i <= nx; ++i) {
      const double x = -quad.half_width + hx * static_cast<double>(i);
      for (std::size_t k = 0; k <= grid.n_steps; ++k) {
        xi[k] = f.f(mu.values[k], grid.node(k), x);
        max_abs = std::max(max_abs, std::abs(xi[k]));
        if (i == 0 || i == nx)
          boundary_abs = std::max(boundary_abs, std::abs(xi[k]));
      }
      const double w = (i == 0 || i == nx) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc.add(w * symmetric_sum(xi, mu));
    }
    res.lhs = acc.total() * (hx / 3.0);
  }

  // rhs: Simpson in x at each time node, then one symmetric integral
  {
    std::vector<double> eta(grid.n_steps + 1);
    for (std::size_t k = 0; k <= grid.n_steps; ++k) {
      const double y = mu.values[k];
      const double t = grid.node(k);
      eta[k] = simpson([&](double x) { return f.f(y, t, x); },
                       -quad.half_width, quad.half_width, quad.panels);
    }
    res.rhs = symmetric_sum(eta, mu);
  }

  res.truncation_warning = boundary_abs > 1e-8 * std::max(max_abs, 1e-300);
  return res;
}

}  // namespace symflow
