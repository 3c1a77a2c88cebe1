#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "polo/agent.hpp"
#include "polo/envs.hpp"

namespace polo {

// Invalid or malformed experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string command;  // explore | sparse-goal | pendulum-horizon |
                        // nstep-sweep | verify-bounds
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  int jobs = 1;
  // full parsed document (post-overrides), echoed into the output directory
  std::string document;
};

// Parses and validates a config document; unknown fields are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);

struct ExperimentOverrides {
  std::vector<std::uint64_t> seeds;  // non-empty: replaces config seeds
  std::string out_dir;               // non-empty: replaces config out_dir
  int jobs = 0;                      // > 0: replaces config jobs
};

void apply_overrides(ExperimentConfig& cfg, const ExperimentOverrides& o);

// Runs the experiment, writing CSV/JSON outputs into cfg.out_dir. Returns 0
// on success, 1 when a verification suite reports violations. Throws
// ConfigError for bad configs and propagates runtime faults.
int run_experiment(const ExperimentConfig& cfg);

// Runs fn(0..count-1) across `jobs` worker threads.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

// One exploration run of a single agent; shared by the explore command and
// the acceptance suite.
struct ExploreRunResult {
  std::string agent;
  std::uint64_t seed = 0;
  std::vector<double> coverage_series;  // one entry per step
  double final_coverage = 0.0;
  double displacement = 0.0;  // |position(T) - position(1)|
  RunLog log;
};

ExploreRunResult run_explore_single(const PointMassWorld& world,
                                    const std::string& agent, PoloConfig cfg,
                                    int grid_resolution);

// RMSE between the ensemble's mean member prediction and v_star over all
// free cells.
double gridworld_value_rmse(const GridWorld& world, const TabularValue& v_star,
                            const ValueEnsemble& ensemble);

double median(std::vector<double> values);

}  // namespace polo
