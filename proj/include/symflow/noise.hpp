#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "symflow/core.hpp"
#include "symflow/grid.hpp"
#include "symflow/rng.hpp"

namespace symflow {

enum class NoiseKind { wiener, fbm, sub_fbm, deterministic };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::wiener: return "wiener";
    case NoiseKind::fbm: return "fbm";
    case NoiseKind::sub_fbm: return "subfbm";
    case NoiseKind::deterministic: return "deterministic";
  }
  return "?";
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::wiener;
  double hurst = 0.75;  // used by fbm / sub_fbm only
  double horizon = 1.0;
  std::size_t n_steps = 256;
  std::uint64_t seed = 0;

  TimeGrid grid() const { return TimeGrid(horizon, n_steps); }

  void validate() const {
    grid();  // throws on a degenerate grid
    if (kind == NoiseKind::fbm || kind == NoiseKind::sub_fbm) {
      // H = 1/2 is admitted as the Wiener-reduction validation hook.
      if (!(hurst >= 0.5 && hurst < 1.0))
        throw ConfigError("NoiseSpec: Hurst index must lie in [0.5, 1), got " +
                          std::to_string(hurst));
    }
  }
};

/// One realized trajectory of mu_t = mu((0,t]) on a uniform grid.
/// Immutable after creation; values between nodes are linear interpolants.
struct NoisePath {
  TimeGrid grid;
  std::vector<double> values;  // length n_steps + 1, values[0] == 0
  NoiseKind kind = NoiseKind::deterministic;
  double hurst = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (values.size() != grid.n_steps + 1)
      throw GenerationError("NoisePath: length(values) != n_steps + 1");
    if (values.empty() || values.front() != 0.0)
      throw GenerationError("NoisePath: path must start at 0");
    if (!all_finite(values))
      throw GenerationError("NoisePath: non-finite value in path");
  }

  double terminal() const { return values.back(); }

  double value_at(double t) const {
    if (t <= 0.0) return values.front();
    if (t >= grid.horizon) return values.back();
    const double u = t / grid.dt();
    std::size_t k = static_cast<std::size_t>(u);
    if (k >= grid.n_steps) k = grid.n_steps - 1;
    const double s = u - static_cast<double>(k);
    return (1.0 - s) * values[k] + s * values[k + 1];
  }

  /// Keep every `factor`-th node. The mathematical path (same omega) on a
  /// coarser grid; this is how every refinement ladder produces its levels.
  NoisePath subsample(std::size_t factor) const {
    if (factor == 0 || grid.n_steps % factor != 0)
      throw PreconditionError("NoisePath::subsample: factor must divide n");
    NoisePath out;
    out.grid = TimeGrid(grid.horizon, grid.n_steps / factor);
    out.values.resize(out.grid.n_steps + 1);
    for (std::size_t k = 0; k <= out.grid.n_steps; ++k)
      out.values[k] = values[k * factor];
    out.kind = kind;
    out.hurst = hurst;
    out.seed = seed;
    return out;
  }
};

/// Wiener path by level construction: a coarse skeleton of independent
/// increments followed by Brownian-bridge midpoint insertion, one RNG
/// stream per round. For n = m * 2^k (m odd) and a fixed seed, the first
/// j rounds are identical for every refinement, so the n-step and
/// 2n-step paths agree at shared nodes bit for bit.
inline NoisePath sample_wiener(const NoiseSpec& spec) {
  spec.validate();
  if (spec.kind != NoiseKind::wiener)
    throw PreconditionError("sample_wiener: spec.kind must be wiener");

  const std::size_t n = spec.n_steps;
  std::size_t m = n, rounds = 0;
  while (m % 2 == 0) {
    m /= 2;
    ++rounds;
  }

  NoisePath path;
  path.grid = spec.grid();
  path.values.assign(n + 1, 0.0);
  path.kind = NoiseKind::wiener;
  path.seed = spec.seed;

  // skeleton over m increments
  {
    GaussianStream g(spec.seed, 0);
    const double sd = std::sqrt(spec.horizon / static_cast<double>(m));
    const std::size_t stride = n / m;
    double w = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      w += sd * g.next();
      path.values[j * stride] = w;
    }
  }

  // bridge midpoints, halving the interval length each round
  for (std::size_t r = 1; r <= rounds; ++r) {
    GaussianStream g(spec.seed, r);
    const std::size_t segments = m << (r - 1);
    const std::size_t stride = n / (segments * 2);
    const double h = spec.horizon / static_cast<double>(segments);
    const double sd = std::sqrt(h / 4.0);
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t lo = 2 * s * stride;
      const std::size_t hi = lo + 2 * stride;
      path.values[lo + stride] =
          0.5 * (path.values[lo] + path.values[hi]) + sd * g.next();
    }
  }

  path.validate();
  return path;
}

/// Theoretical covariance of mu_s, mu_t for the stochastic kinds.
inline double theoretical_covariance(NoiseKind kind, double hurst, double s,
                                     double t) {
  switch (kind) {
    case NoiseKind::wiener:
      return std::min(s, t);
    case NoiseKind::fbm: {
      const double p = 2.0 * hurst;
      return 0.5 * (std::pow(s, p) + std::pow(t, p) -
                    std::pow(std::abs(t - s), p));
    }
    case NoiseKind::sub_fbm: {
      const double p = 2.0 * hurst;
      return std::pow(s, p) + std::pow(t, p) -
             0.5 * (std::pow(s + t, p) + std::pow(std::abs(t - s), p));
    }
    case NoiseKind::deterministic:
      return 0.0;
  }
  return 0.0;
}

/// Dense-factorization sampler for fBm / sub-fBm (and Wiener, for
/// cross-checks): builds the covariance matrix at the grid nodes once and
/// reuses its Cholesky factor for every seed. Desk-scale by design; the
/// factorization is limited to n <= 4096.
class GaussianCovSampler {
 public:
  explicit GaussianCovSampler(const NoiseSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.kind == NoiseKind::deterministic)
      throw PreconditionError(
          "GaussianCovSampler: deterministic kind has no covariance");
    if (spec_.n_steps > 4096)
      throw ConfigError(
          "GaussianCovSampler: dense factorization capped at n_steps <= 4096");

    const std::size_t n = spec_.n_steps;
    const TimeGrid grid = spec_.grid();
    Eigen::MatrixXd cov(n, n);
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = i; j <= n; ++j) {
        const double c = theoretical_covariance(spec_.kind, spec_.hurst,
                                                grid.node(i), grid.node(j));
        cov(i - 1, j - 1) = c;
        cov(j - 1, i - 1) = c;
      }

    for (double jitter : {0.0, 1e-14, 1e-12, 1e-10}) {
      Eigen::MatrixXd work = cov;
      if (jitter > 0.0)
        work.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(work);
      if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        return;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov,
                                                      Eigen::EigenvaluesOnly);
    throw GenerationError(
        "GaussianCovSampler: covariance not positive definite after "
        "regularization; smallest eigenvalue ~ " +
        std::to_string(es.eigenvalues().minCoeff()));
  }

  NoisePath sample(std::uint64_t seed) const {
    const std::size_t n = spec_.n_steps;
    GaussianStream g(seed, kind_stream());
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z(i) = g.next();
    Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * z;

    NoisePath path;
    path.grid = spec_.grid();
    path.values.assign(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) path.values[k] = x(k - 1);
    path.kind = spec_.kind;
    path.hurst = spec_.hurst;
    path.seed = seed;
    path.validate();
    return path;
  }

  const NoiseSpec& spec() const { return spec_; }

 private:
  std::uint64_t kind_stream() const {
    return 100 + static_cast<std::uint64_t>(spec_.kind);
  }

  NoiseSpec spec_;
  Eigen::MatrixXd factor_;
};

inline NoisePath sample_fbm(const NoiseSpec& spec) {
  if (spec.kind != NoiseKind::fbm)
    throw PreconditionError("sample_fbm: spec.kind must be fbm");
  return GaussianCovSampler(spec).sample(spec.seed);
}

inline NoisePath sample_subfbm(const NoiseSpec& spec) {
  if (spec.kind != NoiseKind::sub_fbm)
    throw PreconditionError("sample_subfbm: spec.kind must be sub_fbm");
  return GaussianCovSampler(spec).sample(spec.seed);
}

/// Smooth stand-in path mu_t = g(t_k) for validating solvers against
/// closed forms. Requires g(0) = 0.
inline NoisePath deterministic_path(const std::function<double(double)>& g,
                                    const TimeGrid& grid) {
  grid.validate();
  if (!(std::abs(g(0.0)) <= 1e-12))
    throw PreconditionError("deterministic_path: g(0) must be 0");
  NoisePath path;
  path.grid = grid;
  path.values.resize(grid.n_steps + 1);
  path.values[0] = 0.0;
  for (std::size_t k = 1; k <= grid.n_steps; ++k)
    path.values[k] = g(grid.node(k));
  path.kind = NoiseKind::deterministic;
  path.validate();
  return path;
}

/// Convenience dispatch on spec.kind (deterministic not included).
inline NoisePath sample_path(const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseKind::wiener: return sample_wiener(spec);
    case NoiseKind::fbm: return sample_fbm(spec);
    case NoiseKind::sub_fbm: return sample_subfbm(spec);
    case NoiseKind::deterministic:
      throw PreconditionError("sample_path: deterministic needs a function");
  }
  throw PreconditionError("sample_path: unknown kind");
}

/// Sample second-moment matrix at the grid nodes plus its worst deviation
/// from the declared theoretical covariance, both absolute and in units of
/// the per-entry Monte-Carlo standard error.
struct CovarianceReport {
  Eigen::MatrixXd empirical;   // (n+1) x (n+1), node 0 included
  Eigen::MatrixXd theoretical;
  double max_abs_deviation = 0.0;
  double max_z_score = 0.0;  // |emp - theory| / standard error
};

inline CovarianceReport empirical_covariance(
    std::span<const NoisePath> paths) {
  if (paths.size() < 2)
    throw PreconditionError("empirical_covariance: need at least 2 paths");
  const NoisePath& first = paths.front();
  for (const NoisePath& p : paths) {
    if (!(p.grid == first.grid))
      throw PreconditionError("empirical_covariance: mismatched grids");
    if (p.kind != first.kind || p.hurst != first.hurst)
      throw PreconditionError("empirical_covariance: mismatched kinds");
  }

  const std::size_t m = first.grid.n_steps + 1;
  const double inv_n = 1.0 / static_cast<double>(paths.size());
  CovarianceReport rep;
  rep.empirical = Eigen::MatrixXd::Zero(m, m);
  rep.theoretical = Eigen::MatrixXd::Zero(m, m);
  for (const NoisePath& p : paths)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j)
        rep.empirical(i, j) += p.values[i] * p.values[j] * inv_n;

  auto theory_at = [&](std::size_t i, std::size_t j) {
    return theoretical_covariance(first.kind, first.hurst, first.grid.node(i),
                                  first.grid.node(j));
  };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      rep.empirical(j, i) = rep.empirical(i, j);
      const double theory = theory_at(i, j);
      rep.theoretical(i, j) = theory;
      rep.theoretical(j, i) = theory;
      const double dev = std::abs(rep.empirical(i, j) - theory);
      // Var of the second-moment estimator for centered Gaussians
      const double se = std::sqrt(
          (theory_at(i, i) * theory_at(j, j) + theory * theory) * inv_n);
      rep.max_abs_deviation = std::max(rep.max_abs_deviation, dev);
      if (se > 0.0)
        rep.max_z_score = std::max(rep.max_z_score, dev / se);
      else if (dev > 0.0)
        rep.max_z_score = std::numeric_limits<double>::infinity();
    }
  return rep;
}

}  // namespace symflow
