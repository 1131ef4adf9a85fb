#include <CLI11.hpp>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "symflow/symflow.hpp"

namespace {

std::vector<std::size_t> parse_levels(const std::string& csv) {
  std::vector<std::size_t> levels;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    levels.push_back(static_cast<std::size_t>(std::stoull(item)));
  return levels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symflow: pathwise studies of transport driven by a "
               "stochastic measure"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string levels_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;

  CLI::App* run = app.add_subcommand("run", "execute a scenario config");
  run->add_option("config", config_path, "path to a scenario JSON file")
      ->required();
  run->add_option("--out", out_override, "override the output directory");
  run->add_option("--levels", levels_override,
                  "override the refinement levels, e.g. 256,512,1024");
  run->add_option("--seed-override", seed_override,
                  "override the base seed")
      ->trigger_on_parse()
      ->each([&](const std::string&) { has_seed_override = true; });

  std::string summarize_dir;
  CLI::App* summ =
      app.add_subcommand("summarize", "aggregate summary.json files");
  summ->add_option("dir", summarize_dir, "directory of scenario outputs")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      symflow::ScenarioConfig config = symflow::load_config(config_path);
      if (!out_override.empty()) config.output_dir = out_override;
      if (!levels_override.empty())
        config.ladder.levels = parse_levels(levels_override);
      if (has_seed_override) config.ladder.base_seed = seed_override;
      config.validate();
      const symflow::ScenarioResult result = symflow::run_scenario(config);
      std::cout << (result.pass ? "PASS" : "FAIL") << ": scenario '"
                << config.name << "' -> " << result.output_dir.string()
                << "\n";
      if (!result.pass && result.summary.contains("studies")) {
        std::cout << "failed gates:";
        for (const auto& [study, body] :
             result.summary.at("studies").items())
          if (!body.value("pass", true)) std::cout << " " << study;
        std::cout << "\n";
      }
      return result.pass ? 0 : 1;
    }
    if (summ->parsed()) {
      symflow::summarize(summarize_dir);
      return 0;
    }
  } catch (const symflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
