#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "symflow/bump.hpp"
#include "symflow/core.hpp"
#include "symflow/fields.hpp"
#include "symflow/noise.hpp"
#include "symflow/symint.hpp"

namespace symflow {

struct NoiseConfig {
  std::string kind = "wiener";  // wiener | fbm | subfbm | deterministic
  double hurst = 0.75;
  double horizon = 1.0;
  std::string det_preset = "sin";  // sin | linear, for kind=deterministic
};

struct DriftConfig {
  std::string preset = "bump";  // zero | constant | linear | bump
  double c = 0.0;               // constant preset
  double a = 0.5;               // linear preset
  double amplitude = 0.4;       // bump preset
  double center = 0.0;
  double width = 2.0;
  double wobble = 1.0;
};

struct InitialConfig {
  std::string preset = "bump";  // zero | bump | step
  double amplitude = 1.0;
  double center = 0.0;
  double width = 1.0;
};

struct SpaceConfig {
  double half_width = 10.0;
  std::size_t points = 801;
};

struct LadderConfig {
  std::vector<std::size_t> levels = {256, 512, 1024};
  std::uint64_t base_seed = 1;
  std::size_t n_seeds = 5;
};

struct BumpSpec {
  double center = 0.0;
  double width = 1.0;
};

struct StudyToggles {
  bool chain_rule = true;
  bool fubini = true;
  bool flow = true;
  bool residual = true;
  bool commutator = true;
  bool energy = true;
};

/// Pass/fail thresholds for the toggled gates; defaults match the
/// acceptance suite.
struct GateThresholds {
  double chain_median_ratio = 1.2;
  double chain_final_tol = 1e-2;
  double chain_pass_quantile = 0.9;
  double fubini_rel_tol = 1e-6;
  double residual_median_ratio = 1.2;
  double commutator_median_ratio = 1.5;
  double energy_zero_tol = 1e-12;
};

struct ScenarioConfig {
  std::string name = "default";
  std::string output_dir = "out";
  NoiseConfig noise;
  DriftConfig drift;
  InitialConfig initial;
  SpaceConfig space;
  LadderConfig ladder;
  std::vector<BumpSpec> bumps = {{-2.0, 0.5}, {0.0, 1.0}, {1.5, 2.0}};
  std::vector<double> t_fractions = {0.25, 0.5, 0.75, 1.0};
  StudyToggles studies;
  GateThresholds gates;

  void validate() const;
  NoiseKind noise_kind() const;
  DriftField make_drift() const;
  InitialDatum make_initial() const;
  RefinementLadder make_ladder() const;
  SpaceGrid make_space() const;
  std::vector<TestBump> make_bumps() const;
};

inline NoiseKind ScenarioConfig::noise_kind() const {
  if (noise.kind == "wiener") return NoiseKind::wiener;
  if (noise.kind == "fbm") return NoiseKind::fbm;
  if (noise.kind == "subfbm") return NoiseKind::sub_fbm;
  if (noise.kind == "deterministic") return NoiseKind::deterministic;
  throw ConfigError("noise.kind: unknown kind '" + noise.kind +
                    "' (expected wiener|fbm|subfbm|deterministic)");
}

inline void ScenarioConfig::validate() const {
  const NoiseKind kind = noise_kind();
  if (kind == NoiseKind::fbm || kind == NoiseKind::sub_fbm) {
    if (!(noise.hurst >= 0.5 && noise.hurst < 1.0))
      throw ConfigError("noise.hurst: must lie in [0.5, 1), got " +
                        std::to_string(noise.hurst));
  }
  if (!(noise.horizon > 0.0))
    throw ConfigError("noise.horizon: must be positive");
  if (kind == NoiseKind::deterministic && noise.det_preset != "sin" &&
      noise.det_preset != "linear")
    throw ConfigError("noise.det_preset: expected sin|linear");

  if (drift.preset != "zero" && drift.preset != "constant" &&
      drift.preset != "linear" && drift.preset != "bump")
    throw ConfigError("drift.preset: unknown preset '" + drift.preset + "'");
  if (initial.preset != "zero" && initial.preset != "bump" &&
      initial.preset != "step")
    throw ConfigError("initial.preset: unknown preset '" + initial.preset +
                      "'");

  if (space.points < 2) throw ConfigError("space.points: need at least 2");
  if (!(space.half_width > 0.0))
    throw ConfigError("space.half_width: must be positive");

  if (ladder.levels.size() < 3)
    throw ConfigError("ladder.levels: need at least 3 doubling levels");
  for (std::size_t i = 0; i + 1 < ladder.levels.size(); ++i)
    if (ladder.levels[i + 1] != 2 * ladder.levels[i])
      throw ConfigError("ladder.levels: levels must double");
  if (ladder.n_seeds == 0) throw ConfigError("ladder.n_seeds: need >= 1");

  double max_support = 0.0;
  for (const BumpSpec& bump : bumps) {
    if (!(bump.width > 0.0)) throw ConfigError("bumps: width must be positive");
    max_support = std::max(max_support, std::abs(bump.center) + bump.width);
  }
  if (!(space.half_width > max_support + 3.0))
    throw ConfigError(
        "space.half_width: must exceed the widest test-function support "
        "plus a 3-unit safety margin");

  for (double frac : t_fractions) {
    if (!(frac > 0.0 && frac <= 1.0))
      throw ConfigError("t_fractions: entries must lie in (0, 1]");
    for (std::size_t n : ladder.levels) {
      const double pos = frac * static_cast<double>(n);
      if (std::abs(pos - std::round(pos)) > 1e-9)
        throw ConfigError("t_fractions: " + std::to_string(frac) +
                          " does not land on the level-" + std::to_string(n) +
                          " grid");
    }
  }
}

inline DriftField ScenarioConfig::make_drift() const {
  if (drift.preset == "zero") return zero_drift();
  if (drift.preset == "constant") return constant_drift(drift.c);
  if (drift.preset == "linear") return linear_drift(drift.a);
  return bump_drift(drift.amplitude, drift.center, drift.width, drift.wobble);
}

inline InitialDatum ScenarioConfig::make_initial() const {
  if (initial.preset == "zero") return zero_datum();
  if (initial.preset == "step")
    return step_datum(initial.amplitude, initial.center, initial.width);
  return bump_datum(initial.amplitude, initial.center, initial.width);
}

inline RefinementLadder ScenarioConfig::make_ladder() const {
  RefinementLadder ladder_out;
  ladder_out.levels = ladder.levels;
  ladder_out.base_seed = ladder.base_seed;
  ladder_out.kind = noise_kind();
  ladder_out.hurst = noise.hurst;
  ladder_out.horizon = noise.horizon;
  if (ladder_out.kind == NoiseKind::deterministic) {
    if (noise.det_preset == "linear")
      ladder_out.deterministic_g = [](double t) { return t; };
    else
      ladder_out.deterministic_g = [](double t) { return std::sin(t); };
  }
  return ladder_out;
}

inline SpaceGrid ScenarioConfig::make_space() const {
  return SpaceGrid::symmetric(space.half_width, space.points);
}

inline std::vector<TestBump> ScenarioConfig::make_bumps() const {
  std::vector<TestBump> out;
  for (const BumpSpec& bump : bumps) out.emplace_back(bump.center, bump.width);
  return out;
}

// ---- JSON (keys sorted by nlohmann's std::map: serialization is stable) --

inline void to_json(nlohmann::json& j, const NoiseConfig& c) {
  j = {{"kind", c.kind},
       {"hurst", c.hurst},
       {"horizon", c.horizon},
       {"det_preset", c.det_preset}};
}
inline void from_json(const nlohmann::json& j, NoiseConfig& c) {
  c.kind = j.value("kind", c.kind);
  c.hurst = j.value("hurst", c.hurst);
  c.horizon = j.value("horizon", c.horizon);
  c.det_preset = j.value("det_preset", c.det_preset);
}

inline void to_json(nlohmann::json& j, const DriftConfig& c) {
  j = {{"preset", c.preset}, {"c", c.c},         {"a", c.a},
       {"amplitude", c.amplitude}, {"center", c.center}, {"width", c.width},
       {"wobble", c.wobble}};
}
inline void from_json(const nlohmann::json& j, DriftConfig& c) {
  c.preset = j.value("preset", c.preset);
  c.c = j.value("c", c.c);
  c.a = j.value("a", c.a);
  c.amplitude = j.value("amplitude", c.amplitude);
  c.center = j.value("center", c.center);
  c.width = j.value("width", c.width);
  c.wobble = j.value("wobble", c.wobble);
}

inline void to_json(nlohmann::json& j, const InitialConfig& c) {
  j = {{"preset", c.preset},
       {"amplitude", c.amplitude},
       {"center", c.center},
       {"width", c.width}};
}
inline void from_json(const nlohmann::json& j, InitialConfig& c) {
  c.preset = j.value("preset", c.preset);
  c.amplitude = j.value("amplitude", c.amplitude);
  c.center = j.value("center", c.center);
  c.width = j.value("width", c.width);
}

inline void to_json(nlohmann::json& j, const SpaceConfig& c) {
  j = {{"half_width", c.half_width}, {"points", c.points}};
}
inline void from_json(const nlohmann::json& j, SpaceConfig& c) {
  c.half_width = j.value("half_width", c.half_width);
  c.points = j.value("points", c.points);
}

inline void to_json(nlohmann::json& j, const LadderConfig& c) {
  j = {{"levels", c.levels},
       {"base_seed", c.base_seed},
       {"n_seeds", c.n_seeds}};
}
inline void from_json(const nlohmann::json& j, LadderConfig& c) {
  c.levels = j.value("levels", c.levels);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.n_seeds = j.value("n_seeds", c.n_seeds);
}

inline void to_json(nlohmann::json& j, const BumpSpec& c) {
  j = {{"center", c.center}, {"width", c.width}};
}
inline void from_json(const nlohmann::json& j, BumpSpec& c) {
  c.center = j.value("center", c.center);
  c.width = j.value("width", c.width);
}

inline void to_json(nlohmann::json& j, const StudyToggles& c) {
  j = {{"chain_rule", c.chain_rule}, {"fubini", c.fubini},
       {"flow", c.flow},             {"residual", c.residual},
       {"commutator", c.commutator}, {"energy", c.energy}};
}
inline void from_json(const nlohmann::json& j, StudyToggles& c) {
  c.chain_rule = j.value("chain_rule", c.chain_rule);
  c.fubini = j.value("fubini", c.fubini);
  c.flow = j.value("flow", c.flow);
  c.residual = j.value("residual", c.residual);
  c.commutator = j.value("commutator", c.commutator);
  c.energy = j.value("energy", c.energy);
}

inline void to_json(nlohmann::json& j, const GateThresholds& c) {
  j = {{"chain_median_ratio", c.chain_median_ratio},
       {"chain_final_tol", c.chain_final_tol},
       {"chain_pass_quantile", c.chain_pass_quantile},
       {"fubini_rel_tol", c.fubini_rel_tol},
       {"residual_median_ratio", c.residual_median_ratio},
       {"commutator_median_ratio", c.commutator_median_ratio},
       {"energy_zero_tol", c.energy_zero_tol}};
}
inline void from_json(const nlohmann::json& j, GateThresholds& c) {
  c.chain_median_ratio = j.value("chain_median_ratio", c.chain_median_ratio);
  c.chain_final_tol = j.value("chain_final_tol", c.chain_final_tol);
  c.chain_pass_quantile =
      j.value("chain_pass_quantile", c.chain_pass_quantile);
  c.fubini_rel_tol = j.value("fubini_rel_tol", c.fubini_rel_tol);
  c.residual_median_ratio =
      j.value("residual_median_ratio", c.residual_median_ratio);
  c.commutator_median_ratio =
      j.value("commutator_median_ratio", c.commutator_median_ratio);
  c.energy_zero_tol = j.value("energy_zero_tol", c.energy_zero_tol);
}

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = {{"name", c.name},       {"output_dir", c.output_dir},
       {"noise", c.noise},     {"drift", c.drift},
       {"initial", c.initial}, {"space", c.space},
       {"ladder", c.ladder},   {"bumps", c.bumps},
       {"t_fractions", c.t_fractions}, {"studies", c.studies},
       {"gates", c.gates}};
}
inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  c.name = j.value("name", c.name);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("noise")) j.at("noise").get_to(c.noise);
  if (j.contains("drift")) j.at("drift").get_to(c.drift);
  if (j.contains("initial")) j.at("initial").get_to(c.initial);
  if (j.contains("space")) j.at("space").get_to(c.space);
  if (j.contains("ladder")) j.at("ladder").get_to(c.ladder);
  if (j.contains("bumps")) j.at("bumps").get_to(c.bumps);
  if (j.contains("t_fractions")) j.at("t_fractions").get_to(c.t_fractions);
  if (j.contains("studies")) j.at("studies").get_to(c.studies);
  if (j.contains("gates")) j.at("gates").get_to(c.gates);
}

inline ScenarioConfig default_config() { return ScenarioConfig{}; }

inline ScenarioConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + file.string() + ": " +
                      e.what());
  }
  ScenarioConfig config = j.get<ScenarioConfig>();
  config.validate();
  return config;
}

inline void save_config(const ScenarioConfig& config,
                        const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write config file " + file.string());
  out << nlohmann::json(config).dump(2) << "\n";
}

}  // namespace symflow
