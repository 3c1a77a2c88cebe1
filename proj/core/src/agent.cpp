#include "polo/agent.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace polo {

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) {
    throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }
}

void ReplayBuffer::add(const State& s) {
  states_.push_back(s);
  if (static_cast<int>(states_.size()) > capacity_) states_.pop_front();
}

std::vector<State> ReplayBuffer::sample(int n, RandomStream& rng) const {
  if (states_.empty()) {
    throw std::invalid_argument("ReplayBuffer: cannot sample an empty buffer");
  }
  std::vector<State> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    out.push_back(states_[rng.uniform_int(size())]);
  }
  return out;
}

double RunLog::total_reward() const {
  double sum = 0.0;
  for (const StepRecord& r : steps) sum += r.reward;
  return sum;
}

double RunLog::mean_reward_tail(long window) const {
  if (steps.empty() || window <= 0) return 0.0;
  const std::size_t n = std::min<std::size_t>(window, steps.size());
  double sum = 0.0;
  for (std::size_t i = steps.size() - n; i < steps.size(); ++i) {
    sum += steps[i].reward;
  }
  return sum / static_cast<double>(n);
}

namespace {

// shortest-round-trip formatting so re-runs are byte-identical
void append_number(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

}  // namespace

void write_steps_csv(const RunLog& log, std::ostream& os) {
  if (log.steps.empty()) {
    os << "t,reward,value,best_return\n";
    return;
  }
  const int sdim = static_cast<int>(log.steps.front().state.size());
  const int adim = static_cast<int>(log.steps.front().action.size());
  std::string header = "t";
  for (int i = 0; i < sdim; ++i) header += ",x" + std::to_string(i);
  for (int i = 0; i < adim; ++i) header += ",a" + std::to_string(i);
  header += ",reward,value,best_return\n";
  os << header;
  std::string line;
  for (const StepRecord& r : log.steps) {
    line.clear();
    line += std::to_string(r.t);
    for (int i = 0; i < sdim; ++i) {
      line += ',';
      append_number(line, r.state[i]);
    }
    for (int i = 0; i < adim; ++i) {
      line += ',';
      append_number(line, r.action[i]);
    }
    line += ',';
    append_number(line, r.reward);
    line += ',';
    append_number(line, r.value);
    line += ',';
    append_number(line, r.best_return);
    line += '\n';
    os << line;
  }
}

void write_updates_csv(const RunLog& log, std::ostream& os) {
  os << "t,k,loss,mean_target\n";
  std::string line;
  for (const UpdateRecord& r : log.updates) {
    line.clear();
    line += std::to_string(r.t);
    line += ',';
    line += std::to_string(r.member);
    line += ',';
    append_number(line, r.loss);
    line += ',';
    append_number(line, r.mean_target);
    line += '\n';
    os << line;
  }
}

namespace {

struct AgentStreams {
  RandomStream plan;
  RandomStream buffer;
  RandomStream greedy;
  RandomStream random_actions;
  std::vector<RandomStream> member_targets;

  AgentStreams(std::uint64_t seed, int members)
      : plan(derive_seed(seed, 1)),
        buffer(derive_seed(seed, 2)),
        greedy(derive_seed(seed, 3)),
        random_actions(derive_seed(seed, 4)) {
    member_targets.reserve(members);
    for (int k = 0; k < members; ++k) {
      member_targets.emplace_back(RandomStream(derive_seed(seed, 100 + k)));
    }
  }
};

void validate_config(const PoloConfig& cfg) {
  if (cfg.total_steps < 1) throw std::invalid_argument("polo: T must be >= 1");
  if (cfg.update_frequency < 1) throw std::invalid_argument("polo: Z must be >= 1");
  if (cfg.gradient_steps < 1) throw std::invalid_argument("polo: G must be >= 1");
  if (cfg.minibatch < 1) throw std::invalid_argument("polo: n must be >= 1");
  if (cfg.minibatch > cfg.buffer_capacity) {
    throw std::invalid_argument("polo: minibatch exceeds buffer capacity");
  }
  if (cfg.target_horizon < 1) throw std::invalid_argument("polo: N must be >= 1");
}

// One update event: G rounds of [sample batch, fit every member on its own
// N-step bootstrap targets].
void update_ensemble(const EnvModel& env, const PoloConfig& cfg,
                     ReplayBuffer& buffer, ValueEnsemble& ensemble,
                     AgentStreams& streams, long t, RunLog& log) {
  const PlannerConfig target_cfg = cfg.target_planner();
  for (int g = 0; g < cfg.gradient_steps; ++g) {
    const std::vector<State> batch = buffer.sample(cfg.minibatch, streams.buffer);
    std::vector<Eigen::VectorXd> inputs(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      inputs[i] = env.value_features(batch[i]);
    }
    for (int k = 0; k < ensemble.members(); ++k) {
      const ValueFn member_value = [&, k](const State& s) {
        return ensemble.member_value(k, env.value_features(s));
      };
      std::vector<double> targets(batch.size());
      double target_sum = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        targets[i] = nstep_target(env, batch[i], member_value,
                                  cfg.target_horizon, target_cfg,
                                  streams.member_targets[k]);
        target_sum += targets[i];
      }
      const double loss = ensemble.train_member(k, inputs, targets);
      if (!std::isfinite(loss)) {
        throw ModelFault("polo: non-finite training loss at t=" +
                         std::to_string(t) + ", member " + std::to_string(k));
      }
      log.updates.push_back(
          {t, k, loss, target_sum / static_cast<double>(batch.size())});
    }
  }
}

enum class Acting { planner, greedy, random };

RunLog run_loop(const EnvModel& env, const PoloConfig& cfg, Acting acting,
                bool use_ensemble, bool learn, const UpdateHook& on_update) {
  validate_config(cfg);
  AgentStreams streams(cfg.seed, cfg.ensemble.members);

  const int feature_dim =
      static_cast<int>(env.value_features(env.initial_state()).size());
  InputScaler scaler{env.feature_ranges().lo, env.feature_ranges().hi};
  ValueEnsemble ensemble(cfg.ensemble, feature_dim, scaler,
                         derive_seed(cfg.seed, 10));
  ReplayBuffer buffer(cfg.buffer_capacity);

  const ValueFn terminal =
      use_ensemble ? ValueFn([&](const State& s) {
        return ensemble.value(env.value_features(s));
      })
                   : ValueFn([](const State&) { return 0.0; });

  RunLog log;
  log.steps.reserve(cfg.total_steps);
  State s = env.initial_state();
  std::vector<Action> nominal;

  if (learn && on_update) on_update(0, ensemble);

  for (long t = 1; t <= cfg.total_steps; ++t) {
    Action a(env.action_dim());
    double best_return = 0.0;
    switch (acting) {
      case Acting::planner: {
        PlanResult plan = mppi_plan(env, s, terminal, cfg.planner, streams.plan,
                                    nominal.empty() ? nullptr : &nominal);
        a = plan.first_action;
        best_return = plan.best_return;
        nominal = std::move(plan.nominal);
        break;
      }
      case Acting::greedy:
        a = greedy_action(env, s, terminal, cfg.greedy_action_samples,
                          cfg.planner.gamma, streams.greedy);
        break;
      case Acting::random:
        for (int d = 0; d < env.action_dim(); ++d) {
          a[d] = streams.random_actions.uniform(env.action_bounds().lo[d],
                                                env.action_bounds().hi[d]);
        }
        break;
    }

    const StepResult r = step(env, s, a);
    const double value_here = use_ensemble
                                  ? ensemble.value(env.value_features(s))
                                  : 0.0;
    log.steps.push_back({t, s, env.action_bounds().clamp(a), r.reward,
                         value_here, best_return});
    buffer.add(s);

    if (learn && t % cfg.update_frequency == 0) {
      update_ensemble(env, cfg, buffer, ensemble, streams, t, log);
      if (on_update) on_update(t, ensemble);
    }
    s = r.next;
  }
  return log;
}

}  // namespace

RunLog polo_run(const EnvModel& env, const PoloConfig& cfg,
                const UpdateHook& on_update) {
  return run_loop(env, cfg, Acting::planner, true, true, on_update);
}

RunLog baseline_run(const EnvModel& env, BaselineKind kind,
                    const PoloConfig& cfg, const UpdateHook& on_update) {
  switch (kind) {
    case BaselineKind::random:
      return run_loop(env, cfg, Acting::random, false, false, on_update);
    case BaselineKind::greedy_ensemble:
      return run_loop(env, cfg, Acting::greedy, true, true, on_update);
    case BaselineKind::mpc_no_value:
      return run_loop(env, cfg, Acting::planner, false, false, on_update);
  }
  throw std::invalid_argument("baseline_run: unknown baseline kind");
}

}  // namespace polo
