#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "symflow/bump.hpp"
#include "symflow/core.hpp"
#include "symflow/fields.hpp"
#include "symflow/grid.hpp"
#include "symflow/noise.hpp"
#include "symflow/quadrature.hpp"
#include "symflow/transport.hpp"

namespace symflow {

namespace detail {

/// Mollifier taps at grid offsets, Simpson-weighted and renormalized to
/// unit discrete mass, so constants are reproduced exactly.
inline std::vector<double> mollifier_taps(double eps, double dx) {
  if (!(eps > 0.0)) throw ConfigError("mollify: eps must be positive");
  if (eps < 2.0 * dx)
    throw ResolutionError("mollify: eps < 2*dx, kernel unresolved by grid");
  const auto m = static_cast<std::size_t>(std::floor(eps / dx + 1e-12));
  const Mollifier kernel(eps);
  std::vector<double> taps(2 * m + 1);
  Accumulator mass;
  for (std::size_t j = 0; j < taps.size(); ++j) {
    const double y = (static_cast<double>(j) - static_cast<double>(m)) * dx;
    const double w = (j == 0 || j == taps.size() - 1)
                         ? 1.0
                         : (j % 2 == 1 ? 4.0 : 2.0);
    taps[j] = (w * dx / 3.0) * kernel.value(y);
    mass.add(taps[j]);
  }
  const double total = mass.total();
  for (double& t : taps) t /= total;
  return taps;
}

}  // namespace detail

/// Discrete convolution with the Simpson-weighted mollifier kernel.
/// Values outside the array are treated as zero, so fields should be
/// compactly supported inside the window.
inline std::vector<double> mollify(std::span<const double> values,
                                   const SpaceGrid& grid, double eps) {
  const std::vector<double> taps = detail::mollifier_taps(eps, grid.dx());
  const std::size_t m = taps.size() / 2;
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    Accumulator acc;
    for (std::size_t j = 0; j < taps.size(); ++j) {
      const auto off = static_cast<std::ptrdiff_t>(i) +
                       static_cast<std::ptrdiff_t>(m) -
                       static_cast<std::ptrdiff_t>(j);
      if (off >= 0 && off < static_cast<std::ptrdiff_t>(values.size()))
        acc.add(taps[j] * values[static_cast<std::size_t>(off)]);
    }
    out[i] = acc.total();
  }
  return out;
}

/// Pointwise commutator values on a window grid with their norms.
struct CommutatorField {
  SpaceGrid grid;
  std::vector<double> values;

  double sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double l1_norm() const {
    std::vector<double> abs_vals(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      abs_vals[i] = std::abs(values[i]);
    return trapezoid_samples(abs_vals, grid.dx());
  }
};

/// R_eps(B, V) = B * d(phi_eps * V)/dx - phi_eps * (B dV/dx) on the window.
/// Both spatial derivatives use the same centered-difference operator:
/// differencing and discrete convolution then commute exactly, so the
/// constant-B and constant-V cases vanish at rounding level, which is the
/// structural property the decay study leans on. Fields are evaluated on a
/// padded grid so no zero-extension artifacts enter the window.
inline CommutatorField commutator(const std::function<double(double)>& B,
                                  const std::function<double(double)>& V,
                                  double eps, const SpaceGrid& window) {
  window.validate();
  const double dx = window.dx();
  if (eps < 8.0 * dx)
    throw ResolutionError(
        "commutator: need dx <= eps/8 to separate the eps-limit from "
        "difference error");
  const std::vector<double> taps = detail::mollifier_taps(eps, dx);
  const std::size_t m = taps.size() / 2;
  const std::size_t pad = m + 1;

  const std::size_t n_ext = window.n_points + 2 * pad;
  std::vector<double> Bv(n_ext), Vv(n_ext);
  for (std::size_t i = 0; i < n_ext; ++i) {
    const double x =
        window.x_min + dx * (static_cast<double>(i) - static_cast<double>(pad));
    Bv[i] = B(x);
    Vv[i] = V(x);
  }

  // centered differences on the extended range (valid for 1..n_ext-2)
  std::vector<double> DV(n_ext, 0.0);
  for (std::size_t i = 1; i + 1 < n_ext; ++i)
    DV[i] = (Vv[i + 1] - Vv[i - 1]) / (2.0 * dx);

  auto convolve_at = [&](const std::vector<double>& a, std::size_t i) {
    Accumulator acc;
    for (std::size_t j = 0; j < taps.size(); ++j)
      acc.add(taps[j] * a[i + m - j]);
    return acc.total();
  };

  CommutatorField out;
  out.grid = window;
  out.values.resize(window.n_points);
  std::vector<double> BDV(n_ext, 0.0);
  for (std::size_t i = 1; i + 1 < n_ext; ++i) BDV[i] = Bv[i] * DV[i];

  // mollified V on the stencil needed by the centered difference
  std::vector<double> molV(n_ext, 0.0);
  for (std::size_t i = m; i + m < n_ext; ++i) molV[i] = convolve_at(Vv, i);

  for (std::size_t i = 0; i < window.n_points; ++i) {
    const std::size_t e = i + pad;
    const double d_molV = (molV[e + 1] - molV[e - 1]) / (2.0 * dx);
    out.values[i] = Bv[e] * d_molV - convolve_at(BDV, e);
  }
  return out;
}

struct DecayRow {
  double eps = 0.0;
  double l1_norm = 0.0;
  double sup_norm = 0.0;
};

struct DecayStudy {
  std::vector<DecayRow> rows;        // one block per (B,V) pair, eps-ordered
  double median_halving_ratio = 0.0; // L1 ratio per eps halving
  bool non_increasing = true;
};

/// Commutator decay over a halving eps ladder for a battery of (B, V)
/// pairs. Only the convergence to zero is guaranteed for Lipschitz B and
/// C^1 V; the measured halving ratios are descriptive.
inline DecayStudy commutator_decay_study(
    std::span<const std::pair<std::function<double(double)>,
                              std::function<double(double)>>> pairs,
    std::span<const double> eps_values, const SpaceGrid& window) {
  DecayStudy study;
  std::vector<double> ratios;
  for (const auto& [B, V] : pairs) {
    std::vector<double> l1s;
    for (double eps : eps_values) {
      CommutatorField field = commutator(B, V, eps, window);
      study.rows.push_back({eps, field.l1_norm(), field.sup_norm()});
      l1s.push_back(field.l1_norm());
    }
    for (std::size_t i = 0; i + 1 < l1s.size(); ++i) {
      if (l1s[i + 1] > l1s[i] * (1.0 + 1e-9) + 1e-15)
        study.non_increasing = false;
      if (l1s[i + 1] > 1e-300) ratios.push_back(l1s[i] / l1s[i + 1]);
    }
  }
  study.median_halving_ratio = median(ratios);
  return study;
}

/// Time-indexed field shifted along the path: W(t, z) = w(t, z + mu_t).
struct ShiftedField {
  std::function<double(std::size_t, double)> value;  // (time index k, z)
  std::function<double(std::size_t, double)> dz;     // optional
};

inline ShiftedField shift_solution(const SolutionField& u) {
  const NoisePath& mu = u.path();
  return {[&u, &mu](std::size_t k, double z) {
            return u.value(k, z + mu.values[k]);
          },
          nullptr};
}

/// Commutator of the shifted fields at one time slice.
inline CommutatorField commutator(const ShiftedField& B, const ShiftedField& V,
                                  double eps, std::size_t t_index,
                                  const SpaceGrid& window) {
  return commutator([&](double z) { return B.value(t_index, z); },
                    [&](double z) { return V.value(t_index, z); }, eps,
                    window);
}

inline ShiftedField shift_drift(const DriftField& b, const NoisePath& mu) {
  return {[&b, &mu](std::size_t k, double z) {
            return b.b(mu.grid.node(k), z + mu.values[k]);
          },
          [&b, &mu](std::size_t k, double z) {
            return b.b_x(mu.grid.node(k), z + mu.values[k]);
          }};
}

struct EnergyRow {
  double t = 0.0;
  double lhs = 0.0;             // int V^2 pi_r dz
  double rhs_drift_term = 0.0;  // int_0^t int V^2 pi_r dB/dz dz ds
  double rhs_tail_term = 0.0;   // int_0^t int B V^2 pi_r' dz ds
  double discrepancy = 0.0;
};

/// All three terms of the localized energy identity by quadrature. For a
/// genuine zero-initial-datum solution every entry is zero; synthetic
/// fields act as negative controls.
inline std::vector<EnergyRow> energy_identity_check(
    const ShiftedField& V, const ShiftedField& B, double r,
    std::span<const std::size_t> t_indices, const TimeGrid& grid,
    std::size_t panels = 384) {
  if (!V.value || !B.value || !B.dz)
    throw PreconditionError(
        "energy_identity_check: V needs a value and B a value and dz");
  const Cutoff cutoff(r);
  std::size_t k_max = 0;
  for (std::size_t k : t_indices) k_max = std::max(k_max, k);
  if (k_max > grid.n_steps)
    throw PreconditionError("energy_identity_check: index beyond grid");

  // pi_r supports [-2r, 2r]; pi_r' supports the two bands r <= |z| <= 2r
  auto energy_at = [&](std::size_t k) {
    return simpson(
        [&](double z) {
          const double v = V.value(k, z);
          return v * v * cutoff.value(z);
        },
        -2.0 * r, 2.0 * r, panels);
  };
  auto drift_integrand_at = [&](std::size_t k) {
    return simpson(
        [&](double z) {
          const double v = V.value(k, z);
          return v * v * cutoff.value(z) * B.dz(k, z);
        },
        -2.0 * r, 2.0 * r, panels);
  };
  auto tail_integrand_at = [&](std::size_t k) {
    auto f = [&](double z) {
      const double v = V.value(k, z);
      return B.value(k, z) * v * v * cutoff.deriv(z);
    };
    const std::size_t band_panels = std::max<std::size_t>(panels / 2, 64);
    return simpson(f, -2.0 * r, -r, band_panels) +
           simpson(f, r, 2.0 * r, band_panels);
  };

  std::vector<double> drift_series(k_max + 1), tail_series(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) {
    drift_series[k] = drift_integrand_at(k);
    tail_series[k] = tail_integrand_at(k);
  }
  const std::vector<double> drift_prefix =
      cumulative_trapezoid(drift_series, grid.dt());
  const std::vector<double> tail_prefix =
      cumulative_trapezoid(tail_series, grid.dt());

  std::vector<EnergyRow> rows;
  for (std::size_t k : t_indices) {
    EnergyRow row;
    row.t = grid.node(k);
    row.lhs = energy_at(k);
    row.rhs_drift_term = drift_prefix[k];
    row.rhs_tail_term = tail_prefix[k];
    row.discrepancy = row.lhs - row.rhs_drift_term - row.rhs_tail_term;
    rows.push_back(row);
  }
  return rows;
}

struct TailBoundCheck {
  double term = 0.0;   // |int B V^2 pi_r' dz|
  double bound = 0.0;  // (C/r) sup|V|^2 int_{r<=|z|<=2r} |B| dz
  bool holds = false;
};

/// The cutoff-derivative estimate behind the Gronwall closing step, with
/// both sides computed on the same quadrature nodes.
inline TailBoundCheck tail_term_bound_check(
    const std::function<double(double)>& V,
    const std::function<double(double)>& B, double r,
    std::size_t panels = 256) {
  const Cutoff cutoff(r);
  double sup_v = 0.0;
  const std::size_t scan = 4 * panels;
  for (std::size_t i = 0; i <= scan; ++i) {
    const double z =
        -2.0 * r + 4.0 * r * static_cast<double>(i) / static_cast<double>(scan);
    sup_v = std::max(sup_v, std::abs(V(z)));
  }
  auto term_f = [&](double z) {
    const double v = V(z);
    return B(z) * v * v * cutoff.deriv(z);
  };
  auto babs = [&](double z) { return std::abs(B(z)); };
  TailBoundCheck check;
  check.term = std::abs(simpson(term_f, -2.0 * r, -r, panels) +
                        simpson(term_f, r, 2.0 * r, panels));
  const double b_mass = simpson(babs, -2.0 * r, -r, panels) +
                        simpson(babs, r, 2.0 * r, panels);
  check.bound =
      (Cutoff::deriv_bound_constant() / r) * sup_v * sup_v * b_mass;
  check.holds = check.term <= check.bound * (1.0 + 1e-9) + 1e-30;
  return check;
}

struct GronwallReport {
  std::vector<double> bound;  // R * exp(K t_k)
  bool premise_holds = false;     // h <= K int h + R discretely
  bool conclusion_holds = false;  // h <= bound
  double max_tightness = 0.0;     // max h_k / bound_k
  bool pass = false;
};

/// Discrete Gronwall check: given the premise h(t) <= K int_0^t h + R on
/// the series, the conclusion is h(t) <= R exp(K t).
inline GronwallReport gronwall_bound(std::span<const double> h, double K,
                                     double R, const TimeGrid& grid) {
  if (h.size() != grid.n_steps + 1)
    throw PreconditionError("gronwall_bound: series length mismatch");
  for (double v : h)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw PreconditionError("gronwall_bound: h must be nonnegative");
  if (K < 0.0 || R < 0.0)
    throw PreconditionError("gronwall_bound: K and R must be nonnegative");

  const std::vector<double> prefix = cumulative_trapezoid(h, grid.dt());
  GronwallReport rep;
  rep.premise_holds = true;
  rep.conclusion_holds = true;
  rep.bound.resize(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double rhs = K * prefix[k] + R;
    if (h[k] > rhs * (1.0 + 1e-12) + 1e-300) rep.premise_holds = false;
    rep.bound[k] = R * std::exp(K * grid.node(k));
    if (h[k] > rep.bound[k] * (1.0 + 1e-9) + 1e-300)
      rep.conclusion_holds = false;
    if (rep.bound[k] > 0.0)
      rep.max_tightness = std::max(rep.max_tightness, h[k] / rep.bound[k]);
  }
  rep.pass = rep.premise_holds && rep.conclusion_holds;
  return rep;
}

}  // namespace symflow
