#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "symflow/config.hpp"
#include "symflow/flow.hpp"
#include "symflow/report.hpp"
#include "symflow/symint.hpp"
#include "symflow/transport.hpp"
#include "symflow/uniqueness.hpp"

namespace symflow {

struct ScenarioResult {
  nlohmann::json summary;
  bool pass = true;
  std::filesystem::path output_dir;
};

namespace detail {

inline Integrand chain_rule_integrand() {
  return {[](double y, double t) { return std::sin(y) * std::exp(t); },
          [](double y, double t) { return std::cos(y) * std::exp(t); },
          [](double y, double t) { return std::sin(y) * std::exp(t); },
          "sin(y)e^t"};
}

inline void write_json(const nlohmann::json& j,
                       const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << j.dump(2) << "\n";
}

inline void write_path_csv(const NoisePath& path,
                           const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << "t,value\n";
  for (std::size_t k = 0; k <= path.grid.n_steps; ++k)
    out << format_double(path.grid.node(k)) << ","
        << format_double(path.values[k]) << "\n";
}

inline void write_flow_csv(const FlowField& flow,
                           const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << "t,x0,X,Xp\n";
  const std::size_t kt = std::max<std::size_t>(1, flow.n_times() / 64);
  const std::size_t ki = std::max<std::size_t>(1, flow.n_x() / 100);
  for (std::size_t k = 0; k <= flow.n_times(); k += kt)
    for (std::size_t i = 0; i < flow.n_x(); i += ki)
      out << format_double(flow.path.grid.node(k)) << ","
          << format_double(flow.space.node(i)) << ","
          << format_double(flow.x(k, i)) << ","
          << format_double(flow.xp(k, i)) << "\n";
}

}  // namespace detail

/// Execute every study toggled in the config, write its CSV/JSON artifacts
/// under the output directory, and fold the per-study gates into one
/// pass/fail verdict.
inline ScenarioResult run_scenario(ScenarioConfig config) {
  config.validate();
  const std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);

  ScenarioResult result;
  result.output_dir = out_dir;
  nlohmann::json& summary = result.summary;
  summary["scenario"] = config.name;
  summary["config"] = nlohmann::json(config);

  const RefinementLadder ladder = config.make_ladder();
  const DriftField drift = config.make_drift();
  const InitialDatum initial = config.make_initial();
  const SpaceGrid space = config.make_space();
  const std::vector<TestBump> bumps = config.make_bumps();

  LadderSampler sampler(ladder);
  const NoisePath finest = sampler.finest_path(ladder.base_seed);
  detail::write_path_csv(finest, out_dir / "noise_path.csv");

  auto record_gate = [&](const std::string& study, bool ok) {
    summary["studies"][study]["pass"] = ok;
    if (!ok) result.pass = false;
  };

  if (config.studies.chain_rule) {
    ChainRuleStudy study = chain_rule_study(
        detail::chain_rule_integrand(), ladder, config.ladder.n_seeds,
        config.gates.chain_final_tol);
    study.report.write_csv(out_dir / "chain_rule.csv");
    summary["studies"]["chain_rule"]["median_ratio"] = study.median_ratio;
    summary["studies"]["chain_rule"]["quantile_pass_fraction"] =
        study.final_pass_fraction;
    detail::write_json(
        {{"median_ratio", study.median_ratio},
         {"quantile_pass_fraction", study.final_pass_fraction}},
        out_dir / "chain_rule_summary.json");
    record_gate("chain_rule",
                study.median_ratio >= config.gates.chain_median_ratio &&
                    study.final_pass_fraction >=
                        config.gates.chain_pass_quantile);
  }

  if (config.studies.fubini) {
    struct Family {
      std::string name;
      ParamIntegrand f;
      double tol;
    };
    auto psi = [](double x) { return smooth_bump(x / 3.0); };
    std::vector<Family> families;
    families.push_back(
        {"bump_only",
         {[psi](double, double, double x) { return psi(x); }, nullptr,
          nullptr, nullptr, nullptr, nullptr, "psi(x)"},
         1e-10});
    families.push_back(
        {"separable",
         {[psi](double y, double, double x) { return psi(x) * y; }, nullptr,
          nullptr, nullptr, nullptr, nullptr, "psi(x)y"},
         1e-10});
    families.push_back(
        {"nonseparable",
         {[](double y, double t, double x) {
            return std::exp(-x * x) * std::sin(y + t);
          },
          [](double y, double t, double x) {
            return std::exp(-x * x) * std::cos(y + t);
          },
          [](double y, double t, double x) {
            return std::exp(-x * x) * std::cos(y + t);
          },
          [](double x) { return std::exp(-x * x); },
          [](double x) { return std::exp(-x * x); },
          [](double x) { return std::exp(-x * x); }, "exp(-x^2)sin(y+t)"},
         config.gates.fubini_rel_tol});

    ConvergenceReport report;
    report.name = "fubini";
    report.columns = {"family", "lhs", "rhs", "abs_diff"};
    bool ok = true;
    for (std::size_t fi = 0; fi < families.size(); ++fi) {
      const FubiniResult res = fubini_check(families[fi].f, finest);
      const double diff = std::abs(res.lhs - res.rhs);
      report.add_row({static_cast<double>(fi), res.lhs, res.rhs, diff});
      const double tol =
          families[fi].tol * std::max(std::abs(res.lhs), 1.0);
      if (diff > tol) ok = false;
      summary["studies"]["fubini"][families[fi].name] = diff;
    }
    report.write_csv(out_dir / "fubini.csv");
    record_gate("fubini", ok);
  }

  if (config.studies.flow) {
    // closed-form checks ride on the scenario's own path
    bool ok = true;
    {
      FlowField free_flow =
          build_flow(zero_drift(), finest,
                     SpaceGrid::symmetric(config.space.half_width, 101));
      double worst = 0.0;
      for (std::size_t k = 0; k <= free_flow.n_times();
           k += std::max<std::size_t>(1, free_flow.n_times() / 16))
        for (std::size_t i = 0; i < free_flow.n_x(); i += 10)
          worst = std::max(worst,
                           std::abs(free_flow.x(k, i) -
                                    (free_flow.space.node(i) +
                                     finest.values[k])));
      summary["studies"]["flow"]["zero_drift_error"] = worst;
      ok = ok && worst <= 1e-10;
    }
    FlowField flow = build_flow(drift, finest, space);
    // exhaustive monotonicity is enforced inside solve_flow; check the
    // derivative bounds here
    bool bounds_ok = true;
    const double K = drift.lipschitz_bound;
    for (std::size_t k = 0; k <= flow.n_times() && bounds_ok; ++k) {
      const double t = flow.path.grid.node(k);
      const double lo = std::exp(-K * t) * (1.0 - 1e-9);
      const double hi = std::exp(K * t) * (1.0 + 1e-9);
      for (std::size_t i = 0; i < flow.n_x(); ++i) {
        const double xp = flow.xp(k, i);
        if (!(xp >= lo && xp <= hi)) {
          bounds_ok = false;
          break;
        }
      }
    }
    summary["studies"]["flow"]["derivative_bounds"] = bounds_ok;
    ok = ok && bounds_ok;
    detail::write_flow_csv(flow, out_dir / "flow.csv");

    const double r_values[] = {1.0, 2.0, 4.0, 8.0};
    const TailAuditReport tail =
        audit_tail_condition(drift, r_values, finest.grid);
    nlohmann::json tail_json;
    tail_json["r"] = tail.r_values;
    tail_json["sup_integral"] = tail.integrals;
    tail_json["decays"] = tail.decays;
    detail::write_json(tail_json, out_dir / "tail_audit.json");
    summary["studies"]["flow"]["tail_decays"] = tail.decays;
    record_gate("flow", ok);
  }

  if (config.studies.residual) {
    TransportScenario transport{drift, initial, space, false};
    ResidualStudy study =
        residual_study(transport, ladder, bumps, config.t_fractions,
                       config.ladder.n_seeds);
    study.report.write_csv(out_dir / "residual.csv");
    summary["studies"]["residual"]["median_ratio"] = study.median_ratio;

    TransportScenario frozen{drift, initial, space, true};
    ResidualStudy probe = residual_study(frozen, ladder, bumps,
                                         config.t_fractions, 1);
    probe.report.write_csv(out_dir / "residual_frozen_probe.csv");
    const double solution_final = study.level_max.back();
    const double frozen_final = probe.level_max.back();
    summary["studies"]["residual"]["frozen_to_solution_ratio"] =
        solution_final > 0.0 ? frozen_final / solution_final
                             : std::numeric_limits<double>::infinity();

    const bool ok = !(study.median_ratio < config.gates.residual_median_ratio);
    record_gate("residual", ok);
  }

  if (config.studies.commutator || config.studies.energy) {
    // uniqueness machinery runs on the fields shifted along the path
    SolutionField solution = solve_transport(initial, drift, finest, space);
    const std::size_t k_half = finest.grid.n_steps / 2;

    if (config.studies.commutator) {
      auto B = [&](double z) {
        return drift.b(finest.grid.node(k_half),
                       z + finest.values[k_half]);
      };
      auto V = [&](double z) {
        return solution.value(k_half, z + finest.values[k_half]);
      };
      const double eps_values[] = {0.4, 0.2, 0.1, 0.05};
      const SpaceGrid window(-5.0, 5.0, 1601);
      std::vector<std::pair<std::function<double(double)>,
                            std::function<double(double)>>>
          pairs{{B, V}};
      DecayStudy decay = commutator_decay_study(pairs, eps_values, window);
      ConvergenceReport report;
      report.name = "commutator_decay";
      report.columns = {"eps", "l1_norm", "sup_norm"};
      double max_l1 = 0.0;
      for (const DecayRow& row : decay.rows) {
        report.add_row({row.eps, row.l1_norm, row.sup_norm});
        max_l1 = std::max(max_l1, row.l1_norm);
      }
      report.write_csv(out_dir / "commutator_decay.csv");
      summary["studies"]["commutator"]["median_halving_ratio"] =
          decay.median_halving_ratio;
      const bool ok =
          max_l1 <= 1e-12 ||
          (decay.non_increasing &&
           decay.median_halving_ratio >= config.gates.commutator_median_ratio);
      record_gate("commutator", ok);
    }

    if (config.studies.energy) {
      // zero-initial-datum pipeline: V must stay identically zero
      SolutionField zero_solution =
          solve_transport(zero_datum(), drift, finest, space);
      ShiftedField V = shift_solution(zero_solution);
      ShiftedField B = shift_drift(drift, finest);
      std::vector<std::size_t> t_indices;
      for (double frac : config.t_fractions)
        t_indices.push_back(static_cast<std::size_t>(
            std::llround(frac * static_cast<double>(finest.grid.n_steps))));
      const double r = 3.0;
      const std::vector<EnergyRow> rows =
          energy_identity_check(V, B, r, t_indices, finest.grid);
      ConvergenceReport report;
      report.name = "energy";
      report.columns = {"t", "lhs", "rhs_drift_term", "rhs_tail_term",
                        "discrepancy"};
      double worst = 0.0;
      for (const EnergyRow& row : rows) {
        report.add_row({row.t, row.lhs, row.rhs_drift_term, row.rhs_tail_term,
                        row.discrepancy});
        worst = std::max({worst, std::abs(row.lhs), std::abs(row.discrepancy)});
      }
      report.write_csv(out_dir / "energy.csv");
      summary["studies"]["energy"]["max_zero_pipeline_energy"] = worst;
      record_gate("energy", worst <= config.gates.energy_zero_tol);
    }
  }

  summary["pass"] = result.pass;
  detail::write_json(summary, out_dir / "summary.json");
  return result;
}

/// Aggregate every summary.json under `dir` into a terminal table and a
/// deterministic combined JSON file.
inline nlohmann::json summarize(const std::filesystem::path& dir,
                                std::ostream& out = std::cout) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(dir / "summary.json"))
    files.push_back(dir / "summary.json");
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json" &&
        entry.path() != dir / "summary.json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  nlohmann::json all = nlohmann::json::array();
  out << "scenario                 study            metric                  "
         "value      pass\n";
  for (const auto& file : files) {
    std::ifstream in(file);
    nlohmann::json j;
    in >> j;
    const std::string scenario = j.value("scenario", std::string("?"));
    if (j.contains("studies"))
      for (const auto& [study, body] : j.at("studies").items())
        for (const auto& [key, value] : body.items()) {
          if (key == "pass") continue;
          char line[160];
          const double v = value.is_number() ? value.get<double>()
                           : value.is_boolean()
                               ? static_cast<double>(value.get<bool>())
                               : std::numeric_limits<double>::quiet_NaN();
          std::snprintf(line, sizeof(line), "%-24s %-16s %-22s %11.4g  %s\n",
                        scenario.c_str(), study.c_str(), key.c_str(), v,
                        body.value("pass", false) ? "yes" : "no");
          out << line;
        }
    all.push_back({{"file", file.string()},
                   {"scenario", scenario},
                   {"pass", j.value("pass", false)}});
  }
  nlohmann::json combined = {{"scenarios", all}};
  detail::write_json(combined, dir / "summary_all.json");
  return combined;
}

}  // namespace symflow
