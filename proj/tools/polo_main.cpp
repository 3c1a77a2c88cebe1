// Experiment harness CLI: runs a JSON-configured experiment and writes its
// logs and summary artifacts. Exit codes: 0 success, 1 runtime fault or
// failed verification, 2 malformed config.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polo/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    seeds.push_back(std::stoull(item));
  }
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POLO experiment harness"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  std::string config_path;
  std::string seed_override;
  std::string out_override;
  int jobs_override = 0;
  run->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  run->add_option("--seed-override", seed_override,
                  "comma-separated seed list replacing the config seeds");
  run->add_option("--out", out_override, "output directory");
  run->add_option("--jobs", jobs_override, "parallel jobs over seeds/agents");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path << "\n";
      return 2;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();

    polo::ExperimentConfig cfg = polo::parse_experiment_config(buffer.str());
    polo::ExperimentOverrides overrides;
    if (!seed_override.empty()) {
      overrides.seeds = parse_seed_list(seed_override);
      if (overrides.seeds.empty()) {
        std::cerr << "error: --seed-override needs at least one seed\n";
        return 2;
      }
    }
    overrides.out_dir = out_override;
    overrides.jobs = jobs_override;
    polo::apply_overrides(cfg, overrides);

    const int status = polo::run_experiment(cfg);
    if (status != 0) {
      std::cerr << "verification reported violations; see " << cfg.out_dir
                << "\n";
    }
    return status;
  } catch (const polo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
