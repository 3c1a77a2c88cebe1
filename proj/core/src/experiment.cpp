#include "polo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "polo/oracle.hpp"

namespace polo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void fmt_number(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << content;
}

void check_fields(const json& j, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional,
                  const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const char* f : required) {
    if (!j.contains(f)) {
      throw ConfigError(where + ": missing field '" + f + "'");
    }
  }
  for (const auto& [key, _] : j.items()) {
    const bool known =
        std::any_of(required.begin(), required.end(),
                    [&](const char* f) { return key == f; }) ||
        std::any_of(optional.begin(), optional.end(),
                    [&](const char* f) { return key == f; });
    if (!known) {
      throw ConfigError(where + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

constexpr std::initializer_list<const char*> kPoloKeys = {
    "horizon", "rollouts", "noise_sigma", "temperature", "gamma",
    "warm_start", "warm_start_decay", "iterations", "exhaustive_noise", "target_horizon", "target_rollouts",
    "update_frequency", "gradient_steps", "minibatch", "buffer_capacity",
    "members", "hidden", "kappa", "prior_scale", "target_noise", "l2_lambda",
    "normalized_lse", "learning_rate", "greedy_action_samples"};

PoloConfig polo_from_json(const json& root, PoloConfig base) {
  if (!root.contains("polo")) return base;
  const json& j = root.at("polo");
  check_fields(j, {}, kPoloKeys, "polo");
  base.planner.horizon = get_or(j, "horizon", base.planner.horizon);
  base.planner.rollouts = get_or(j, "rollouts", base.planner.rollouts);
  base.planner.noise_sigma = get_or(j, "noise_sigma", base.planner.noise_sigma);
  base.planner.temperature = get_or(j, "temperature", base.planner.temperature);
  base.planner.gamma = get_or(j, "gamma", base.planner.gamma);
  base.planner.warm_start = get_or(j, "warm_start", base.planner.warm_start);
  base.planner.warm_start_decay =
      get_or(j, "warm_start_decay", base.planner.warm_start_decay);
  base.planner.iterations = get_or(j, "iterations", base.planner.iterations);
  base.planner.exhaustive_noise =
      get_or(j, "exhaustive_noise", base.planner.exhaustive_noise);
  base.target_horizon = get_or(j, "target_horizon", base.target_horizon);
  base.target_rollouts = get_or(j, "target_rollouts", base.target_rollouts);
  base.update_frequency = get_or(j, "update_frequency", base.update_frequency);
  base.gradient_steps = get_or(j, "gradient_steps", base.gradient_steps);
  base.minibatch = get_or(j, "minibatch", base.minibatch);
  base.buffer_capacity = get_or(j, "buffer_capacity", base.buffer_capacity);
  base.ensemble.members = get_or(j, "members", base.ensemble.members);
  base.ensemble.hidden = get_or(j, "hidden", base.ensemble.hidden);
  base.ensemble.kappa = get_or(j, "kappa", base.ensemble.kappa);
  base.ensemble.prior_scale = get_or(j, "prior_scale", base.ensemble.prior_scale);
  base.ensemble.target_noise = get_or(j, "target_noise", base.ensemble.target_noise);
  base.ensemble.l2_lambda = get_or(j, "l2_lambda", base.ensemble.l2_lambda);
  base.ensemble.normalized_lse =
      get_or(j, "normalized_lse", base.ensemble.normalized_lse);
  base.ensemble.adam.step_size =
      get_or(j, "learning_rate", base.ensemble.adam.step_size);
  base.greedy_action_samples =
      get_or(j, "greedy_action_samples", base.greedy_action_samples);
  return base;
}

json polo_to_json(const PoloConfig& c) {
  return json{{"horizon", c.planner.horizon},
              {"rollouts", c.planner.rollouts},
              {"noise_sigma", c.planner.noise_sigma},
              {"temperature", c.planner.temperature},
              {"gamma", c.planner.gamma},
              {"warm_start", c.planner.warm_start},
              {"warm_start_decay", c.planner.warm_start_decay},
              {"iterations", c.planner.iterations},
              {"target_horizon", c.target_horizon},
              {"target_rollouts", c.target_rollouts},
              {"update_frequency", c.update_frequency},
              {"gradient_steps", c.gradient_steps},
              {"minibatch", c.minibatch},
              {"buffer_capacity", c.buffer_capacity},
              {"members", c.ensemble.members},
              {"hidden", c.ensemble.hidden},
              {"kappa", c.ensemble.kappa},
              {"prior_scale", c.ensemble.prior_scale},
              {"target_noise", c.ensemble.target_noise},
              {"l2_lambda", c.ensemble.l2_lambda},
              {"normalized_lse", c.ensemble.normalized_lse},
              {"learning_rate", c.ensemble.adam.step_size},
              {"greedy_action_samples", c.greedy_action_samples}};
}

PointMassReward reward_spec_from(const json& j) {
  // delegate to the world loader for exact field validation
  json world = {{"extent", {0.0, 0.0, 1.0, 1.0}},
                {"walls", json::array()},
                {"reward_spec", j}};
  try {
    const PointMassWorld w = PointMassWorld::from_json(world.dump());
    return w.reward_spec();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

PointMassWorld make_point_world(const json& env) {
  const std::string name = env.at("name").get<std::string>();
  if (name == "point_box") {
    check_fields(env, {"name"}, {"reward_spec"}, "env");
    PointMassReward r;
    if (env.contains("reward_spec")) r = reward_spec_from(env["reward_spec"]);
    return PointMassWorld::box(r);
  }
  if (name == "point_maze") {
    check_fields(env, {"name"}, {"reward_spec"}, "env");
    PointMassReward r;
    if (env.contains("reward_spec")) r = reward_spec_from(env["reward_spec"]);
    return PointMassWorld::pinwheel_maze(r);
  }
  if (name == "point_custom") {
    check_fields(env, {"name", "world"}, {}, "env");
    try {
      return PointMassWorld::from_json(env.at("world").dump());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("env: expected a point-mass world, got '" + name + "'");
}

PendulumWorld make_pendulum(const json& env) {
  check_fields(env, {"name"},
               {"mass", "length", "gravity", "dt", "damping", "torque_max",
                "sparse", "upright_threshold", "gamma"},
               "env");
  PendulumParams p;
  p.mass = get_or(env, "mass", p.mass);
  p.length = get_or(env, "length", p.length);
  p.gravity = get_or(env, "gravity", p.gravity);
  p.dt = get_or(env, "dt", p.dt);
  p.damping = get_or(env, "damping", p.damping);
  p.torque_max = get_or(env, "torque_max", p.torque_max);
  p.sparse = get_or(env, "sparse", p.sparse);
  p.upright_threshold = get_or(env, "upright_threshold", p.upright_threshold);
  p.gamma = get_or(env, "gamma", p.gamma);
  return PendulumWorld(p);
}

GridWorld make_gridworld(const json& env) {
  check_fields(env, {"name"},
               {"width", "height", "gamma", "step_reward", "goal",
                "goal_reward", "obstacles", "cell_rewards"},
               "env");
  const int width = get_or(env, "width", 8);
  const int height = get_or(env, "height", 8);
  const double gamma = get_or(env, "gamma", 0.9);
  const std::size_t n = static_cast<std::size_t>(width) * height;

  std::vector<std::uint8_t> obstacles(n, 0);
  if (env.contains("obstacles")) {
    for (const json& cell : env["obstacles"]) {
      const int cx = cell.at(0).get<int>();
      const int cy = cell.at(1).get<int>();
      if (cx < 0 || cx >= width || cy < 0 || cy >= height) {
        throw ConfigError("env: obstacle cell out of range");
      }
      obstacles[cy * width + cx] = 1;
    }
  }
  std::vector<double> rewards(n, get_or(env, "step_reward", 0.0));
  if (env.contains("cell_rewards")) {
    const auto values = env["cell_rewards"].get<std::vector<double>>();
    if (values.size() != n) {
      throw ConfigError("env: cell_rewards must have width*height entries");
    }
    rewards = values;
  }
  if (env.contains("goal")) {
    const int gx = env["goal"].at(0).get<int>();
    const int gy = env["goal"].at(1).get<int>();
    if (gx < 0 || gx >= width || gy < 0 || gy >= height) {
      throw ConfigError("env: goal cell out of range");
    }
    rewards[gy * width + gx] = get_or(env, "goal_reward", 1.0);
  }
  try {
    return GridWorld(width, height, std::move(obstacles), std::move(rewards),
                     gamma);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunLog run_agent(const EnvModel& env, const std::string& agent,
                 const PoloConfig& cfg, const UpdateHook& hook = {}) {
  if (agent == "polo") return polo_run(env, cfg, hook);
  if (agent == "greedy") return baseline_run(env, BaselineKind::greedy_ensemble, cfg, hook);
  if (agent == "random") return baseline_run(env, BaselineKind::random, cfg, hook);
  if (agent == "mpc-no-value") return baseline_run(env, BaselineKind::mpc_no_value, cfg, hook);
  throw ConfigError("unknown agent '" + agent + "'");
}

std::string coverage_csv(const std::vector<double>& series) {
  std::string out = "t,coverage\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    fmt_number(out, series[i]);
    out += '\n';
  }
  return out;
}

std::string steps_csv(const RunLog& log) {
  std::ostringstream os;
  write_steps_csv(log, os);
  return os.str();
}

std::string updates_csv(const RunLog& log) {
  std::ostringstream os;
  write_updates_csv(log, os);
  return os.str();
}

std::string run_tag(const std::string& agent, std::uint64_t seed) {
  return agent + "_seed" + std::to_string(seed);
}

}  // namespace

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ExploreRunResult run_explore_single(const PointMassWorld& world,
                                    const std::string& agent, PoloConfig cfg,
                                    int grid_resolution) {
  ExploreRunResult result;
  result.agent = agent;
  result.seed = cfg.seed;
  result.log = run_agent(world, agent, cfg);

  OccupancyGrid grid(world.extent(), grid_resolution);
  result.coverage_series.reserve(result.log.steps.size());
  for (const StepRecord& r : result.log.steps) {
    grid.add_state(r.state);
    result.coverage_series.push_back(grid.coverage());
  }
  result.final_coverage = grid.coverage();
  if (!result.log.steps.empty()) {
    const State& first = result.log.steps.front().state;
    const State& last = result.log.steps.back().state;
    result.displacement = std::hypot(last[0] - first[0], last[1] - first[1]);
  }
  return result;
}

double gridworld_value_rmse(const GridWorld& world, const TabularValue& v_star,
                            const ValueEnsemble& ensemble) {
  double se = 0.0;
  for (int idx = 0; idx < world.num_cells(); ++idx) {
    const Eigen::VectorXd features = world.value_features(world.state_of(idx));
    double mean = 0.0;
    for (int k = 0; k < ensemble.members(); ++k) {
      mean += ensemble.member_value(k, features);
    }
    mean /= ensemble.members();
    const double err = mean - v_star[idx];
    se += err * err;
  }
  return std::sqrt(se / world.num_cells());
}

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_fields(j, {"command", "seeds"},
               {"out_dir", "jobs", "env", "steps", "agents", "grid_resolution",
                "polo", "mpc_no_value", "mpc_horizons", "polo_horizons",
                "train_steps", "eval_steps", "nstep_values", "trials",
                "epsilon", "gamma", "bound_horizons", "contraction_trials",
                "contraction_max_horizon"},
               "config");

  ExperimentConfig cfg;
  cfg.command = j.at("command").get<std::string>();
  static const char* kCommands[] = {"explore", "sparse-goal",
                                    "pendulum-horizon", "nstep-sweep",
                                    "verify-bounds"};
  if (std::none_of(std::begin(kCommands), std::end(kCommands),
                   [&](const char* c) { return cfg.command == c; })) {
    throw ConfigError("config: unknown command '" + cfg.command + "'");
  }
  try {
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: seeds: ") + e.what());
  }
  if (cfg.seeds.empty()) {
    throw ConfigError("config: seeds must be non-empty");
  }
  cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
  cfg.jobs = get_or(j, "jobs", cfg.jobs);
  if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
  cfg.document = j.dump(2) + "\n";
  return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const ExperimentOverrides& o) {
  json j = json::parse(cfg.document);
  if (!o.seeds.empty()) {
    cfg.seeds = o.seeds;
    j["seeds"] = o.seeds;
  }
  if (!o.out_dir.empty()) {
    cfg.out_dir = o.out_dir;
    j["out_dir"] = o.out_dir;
  }
  if (o.jobs > 0) {
    cfg.jobs = o.jobs;
    j["jobs"] = o.jobs;
  }
  cfg.document = j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

namespace {

struct TaggedRun {
  std::string agent;
  std::uint64_t seed = 0;
  PoloConfig cfg;
};

// explore and sparse-goal share the point-mass machinery
int run_point_mass_command(const ExperimentConfig& cfg, const json& j,
                           bool sparse_goal) {
  json env = j.value("env", json{{"name", "point_box"}});
  if (sparse_goal && !env.contains("reward_spec")) {
    env["reward_spec"] = {{"type", "sparse-goal"},
                          {"center", {0.85, 0.85}},
                          {"radius", 0.08},
                          {"bonus", 1.0}};
  }
  const PointMassWorld world = make_point_world(env);
  const int grid_resolution = get_or(j, "grid_resolution", 20);
  const long steps = get_or<long>(j, "steps", 1000);

  PoloConfig base;
  base.planner.horizon = 32;
  base.planner.rollouts = 48;
  base.planner.noise_sigma = 0.25;
  base.planner.temperature = 0.02;
  base.planner.gamma = 0.99;
  base.planner.warm_start = true;
  base.target_horizon = 8;
  base.target_rollouts = 8;
  base.update_frequency = 16;
  base.gradient_steps = 16;
  base.minibatch = 24;
  base.total_steps = steps;
  base = polo_from_json(j, base);
  base.total_steps = steps;

  std::vector<std::string> agents =
      get_or<std::vector<std::string>>(j, "agents",
                                       sparse_goal
                                           ? std::vector<std::string>{"polo"}
                                           : std::vector<std::string>{
                                                 "polo", "greedy", "random"});

  std::vector<TaggedRun> tasks;
  for (const std::string& agent : agents) {
    for (std::uint64_t seed : cfg.seeds) {
      TaggedRun task{agent, seed, base};
      task.cfg.seed = seed;
      if (agent == "mpc-no-value" && j.contains("mpc_no_value")) {
        const json& o = j.at("mpc_no_value");
        check_fields(o, {},
                     {"horizon", "rollouts", "noise_sigma", "temperature",
                      "warm_start"},
                     "mpc_no_value");
        task.cfg.planner.horizon = get_or(o, "horizon", task.cfg.planner.horizon);
        task.cfg.planner.rollouts = get_or(o, "rollouts", task.cfg.planner.rollouts);
        task.cfg.planner.noise_sigma =
            get_or(o, "noise_sigma", task.cfg.planner.noise_sigma);
        task.cfg.planner.temperature =
            get_or(o, "temperature", task.cfg.planner.temperature);
        task.cfg.planner.warm_start =
            get_or(o, "warm_start", task.cfg.planner.warm_start);
      }
      tasks.push_back(std::move(task));
    }
  }

  std::vector<ExploreRunResult> results(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), cfg.jobs, [&](int i) {
    const TaggedRun& task = tasks[i];
    results[i] = run_explore_single(world, task.agent, task.cfg, grid_resolution);
    const fs::path dir(cfg.out_dir);
    const std::string tag = run_tag(task.agent, task.seed);
    write_file(dir / ("coverage_" + tag + ".csv"),
               coverage_csv(results[i].coverage_series));
    write_file(dir / ("steps_" + tag + ".csv"), steps_csv(results[i].log));
    if (!results[i].log.updates.empty()) {
      write_file(dir / ("updates_" + tag + ".csv"), updates_csv(results[i].log));
    }
  });

  json summary;
  summary["command"] = cfg.command;
  summary["polo_effective"] = polo_to_json(base);
  for (const std::string& agent : agents) {
    std::vector<double> coverages, displacements, rewards;
    for (const ExploreRunResult& r : results) {
      if (r.agent != agent) continue;
      coverages.push_back(r.final_coverage);
      displacements.push_back(r.displacement);
      rewards.push_back(r.log.total_reward());
    }
    summary["agents"][agent] = {
        {"final_coverage", coverages},
        {"median_final_coverage", median(coverages)},
        {"displacement", displacements},
        {"total_reward", rewards},
    };
  }
  write_file(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int run_pendulum_horizon(const ExperimentConfig& cfg, const json& j) {
  const json env = j.value("env", json{{"name", "pendulum"}});
  const PendulumWorld world = make_pendulum(env);
  const std::vector<int> mpc_horizons =
      get_or<std::vector<int>>(j, "mpc_horizons", {16, 64});
  const std::vector<int> polo_horizons =
      get_or<std::vector<int>>(j, "polo_horizons", {16});
  const long train_steps = get_or<long>(j, "train_steps", 4000);
  const long eval_steps = get_or<long>(j, "eval_steps", 1000);

  PoloConfig base;
  base.planner.horizon = 16;
  base.planner.rollouts = 120;
  base.planner.noise_sigma = 0.8;
  base.planner.temperature = 1.25;
  base.planner.gamma = 0.99;
  base.target_horizon = 8;
  base.target_rollouts = 12;
  base.update_frequency = 16;
  base.gradient_steps = 24;
  base.minibatch = 24;
  base = polo_from_json(j, base);

  struct Row {
    int horizon;
    std::string agent;
    std::uint64_t seed;
    double mean_reward;
  };
  std::vector<TaggedRun> tasks;
  for (int h : mpc_horizons) {
    for (std::uint64_t seed : cfg.seeds) {
      TaggedRun t{"mpc", seed, base};
      t.cfg.planner.horizon = h;
      t.cfg.seed = seed;
      t.cfg.total_steps = eval_steps;
      tasks.push_back(std::move(t));
    }
  }
  for (int h : polo_horizons) {
    for (std::uint64_t seed : cfg.seeds) {
      TaggedRun t{"polo", seed, base};
      t.cfg.planner.horizon = h;
      t.cfg.seed = seed;
      t.cfg.total_steps = train_steps + eval_steps;
      tasks.push_back(std::move(t));
    }
  }

  std::vector<Row> rows(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), cfg.jobs, [&](int i) {
    const TaggedRun& task = tasks[i];
    const RunLog log = task.agent == "polo"
                           ? polo_run(world, task.cfg)
                           : baseline_run(world, BaselineKind::mpc_no_value,
                                          task.cfg);
    rows[i] = {task.cfg.planner.horizon, task.agent, task.seed,
               log.mean_reward_tail(eval_steps)};
  });

  std::string csv = "horizon,agent,seed,mean_reward\n";
  for (const Row& r : rows) {
    csv += std::to_string(r.horizon) + "," + r.agent + "," +
           std::to_string(r.seed) + ",";
    fmt_number(csv, r.mean_reward);
    csv += '\n';
  }
  write_file(fs::path(cfg.out_dir) / "horizon_results.csv", csv);

  json summary;
  summary["command"] = cfg.command;
  summary["polo_effective"] = polo_to_json(base);
  for (const Row& r : rows) {
    summary["rows"].push_back(json{{"horizon", r.horizon},
                                   {"agent", r.agent},
                                   {"seed", r.seed},
                                   {"mean_reward", r.mean_reward}});
  }
  write_file(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int run_nstep_sweep(const ExperimentConfig& cfg, const json& j) {
  json env = j.value("env", json{{"name", "gridworld"},
                                 {"width", 8},
                                 {"height", 8},
                                 {"gamma", 0.9},
                                 {"goal", {7, 7}},
                                 {"goal_reward", 1.0}});
  const GridWorld world = make_gridworld(env);
  const TabularMDP mdp = world.to_tabular();
  const TabularValue v_star = value_iteration(mdp, 1e-10);
  const std::vector<int> nstep_values =
      get_or<std::vector<int>>(j, "nstep_values", {1, 2, 4, 8});
  const long steps = get_or<long>(j, "steps", 1500);

  PoloConfig base;
  base.planner.horizon = 8;
  base.planner.rollouts = 24;
  base.planner.noise_sigma = 1.2;
  base.planner.temperature = 0.1;
  base.planner.gamma = world.discount();
  base.target_rollouts = 16;
  base.update_frequency = 16;
  base.gradient_steps = 16;
  base.minibatch = 16;
  base.total_steps = steps;
  base = polo_from_json(j, base);
  base.total_steps = steps;

  struct Task {
    int n;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (int n : nstep_values) {
    for (std::uint64_t seed : cfg.seeds) tasks.push_back({n, seed});
  }

  struct Outcome {
    double rmse = 0.0;
    double mean_reward = 0.0;
    std::string series_csv;
  };
  std::vector<Outcome> outcomes(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), cfg.jobs, [&](int i) {
    PoloConfig run_cfg = base;
    run_cfg.target_horizon = tasks[i].n;
    run_cfg.seed = tasks[i].seed;
    std::string series = "t,value_rmse\n";
    double last_rmse = 0.0;
    const RunLog log = polo_run(world, run_cfg,
                                [&](long t, const ValueEnsemble& ens) {
                                  last_rmse = gridworld_value_rmse(world, v_star, ens);
                                  series += std::to_string(t);
                                  series += ',';
                                  fmt_number(series, last_rmse);
                                  series += '\n';
                                });
    outcomes[i].rmse = last_rmse;
    outcomes[i].mean_reward =
        log.total_reward() / static_cast<double>(run_cfg.total_steps);
    outcomes[i].series_csv = std::move(series);
    write_file(fs::path(cfg.out_dir) /
                   ("value_error_n" + std::to_string(tasks[i].n) + "_seed" +
                    std::to_string(tasks[i].seed) + ".csv"),
               outcomes[i].series_csv);
  });

  std::string csv = "n,seed,value_rmse,mean_reward\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    csv += std::to_string(tasks[i].n) + "," + std::to_string(tasks[i].seed) + ",";
    fmt_number(csv, outcomes[i].rmse);
    csv += ',';
    fmt_number(csv, outcomes[i].mean_reward);
    csv += '\n';
  }
  write_file(fs::path(cfg.out_dir) / "nstep_results.csv", csv);

  json summary;
  summary["command"] = cfg.command;
  summary["polo_effective"] = polo_to_json(base);
  for (int n : nstep_values) {
    std::vector<double> rmses;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].n == n) rmses.push_back(outcomes[i].rmse);
    }
    summary["median_value_rmse"][std::to_string(n)] = median(rmses);
  }
  write_file(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int run_verify_bounds(const ExperimentConfig& cfg, const json& j) {
  BoundCheckOptions opts;
  opts.trials = get_or(j, "trials", 100);
  opts.epsilon = get_or(j, "epsilon", 0.1);
  opts.gamma = get_or(j, "gamma", 0.9);
  opts.seed = cfg.seeds.front();
  const std::vector<int> horizons =
      get_or<std::vector<int>>(j, "bound_horizons", {1, 2, 4});
  const int contraction_trials = get_or(j, "contraction_trials", 1000);
  const int contraction_max_h = get_or(j, "contraction_max_horizon", 5);

  bool ok = true;
  const fs::path dir(cfg.out_dir);
  json summary;
  summary["command"] = cfg.command;

  for (int h : horizons) {
    const BoundReport report = check_mpc_bound(h, opts);
    write_file(dir / ("bounds_h" + std::to_string(h) + ".json"),
               report.to_json() + "\n");
    summary["bounds"][std::to_string(h)] = {{"max_gap", report.max_gap},
                                            {"bound", report.bound},
                                            {"ok", report.ok()}};
    ok = ok && report.ok();
  }

  const TightInstance tight =
      greedy_bound_tight_instance(opts.gamma, opts.epsilon);
  const TabularValue v_star = value_iteration(tight.mdp, 1e-12);
  const TabularPolicy pi = greedy_policy(tight.mdp, tight.v_hat);
  const TabularValue v_pi = policy_eval(tight.mdp, pi);
  const double gap = performance(tight.mdp, v_star, tight.start_dist) -
                     performance(tight.mdp, v_pi, tight.start_dist);
  const double bound =
      2.0 * opts.gamma * opts.epsilon / (1.0 - opts.gamma);
  const bool tight_ok = std::abs(gap - bound) <= 1e-9;
  json tight_json = {{"gamma", opts.gamma},
                     {"epsilon", opts.epsilon},
                     {"bound", bound},
                     {"gap", gap},
                     {"ok", tight_ok}};
  write_file(dir / "tight_instance.json", tight_json.dump(2) + "\n");
  summary["tight_instance"] = tight_json;
  ok = ok && tight_ok;

  const ContractionReport contraction =
      check_contraction(contraction_trials, contraction_max_h, opts.seed);
  write_file(dir / "contraction.json", contraction.to_json() + "\n");
  summary["contraction_ok"] = contraction.ok();
  ok = ok && contraction.ok();

  summary["ok"] = ok;
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  return ok ? 0 : 1;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  const json j = json::parse(cfg.document);
  fs::create_directories(cfg.out_dir);
  // reproducibility contract: echo the exact resolved config and seeds
  json echo = j;
  echo["seeds"] = cfg.seeds;
  echo["out_dir"] = cfg.out_dir;
  write_file(fs::path(cfg.out_dir) / "config.json", echo.dump(2) + "\n");

  if (cfg.command == "explore") return run_point_mass_command(cfg, j, false);
  if (cfg.command == "sparse-goal") return run_point_mass_command(cfg, j, true);
  if (cfg.command == "pendulum-horizon") return run_pendulum_horizon(cfg, j);
  if (cfg.command == "nstep-sweep") return run_nstep_sweep(cfg, j);
  if (cfg.command == "verify-bounds") return run_verify_bounds(cfg, j);
  throw ConfigError("config: unknown command '" + cfg.command + "'");
}

}  // namespace polo
