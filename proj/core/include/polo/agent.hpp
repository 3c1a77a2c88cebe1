#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <ostream>
#include <vector>

#include "polo/core.hpp"
#include "polo/ensemble.hpp"
#include "polo/planner.hpp"
#include "polo/rng.hpp"

namespace polo {

// Bounded FIFO store of visited states.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void add(const State& s);
  // uniform with replacement
  std::vector<State> sample(int n, RandomStream& rng) const;

  int size() const { return static_cast<int>(states_.size()); }
  int capacity() const { return capacity_; }
  const std::deque<State>& states() const { return states_; }

 private:
  int capacity_;
  std::deque<State> states_;
};

struct PoloConfig {
  PlannerConfig planner;      // acting planner (H, R, sigma, tau, gamma, ...)
  int target_horizon = 8;     // N for the regression targets
  int target_rollouts = 0;    // 0: reuse planner.rollouts
  int update_frequency = 16;  // Z
  int gradient_steps = 64;    // G: update rounds per event
  int minibatch = 32;         // n
  EnsembleConfig ensemble;
  int buffer_capacity = 10000;
  long total_steps = 1000;    // T
  std::uint64_t seed = 0;
  int greedy_action_samples = 64;  // candidates for the greedy baseline

  PlannerConfig target_planner() const {
    PlannerConfig cfg = planner;
    cfg.horizon = target_horizon;
    if (target_rollouts > 0) cfg.rollouts = target_rollouts;
    cfg.warm_start = false;
    return cfg;
  }
};

struct StepRecord {
  long t = 0;
  State state;
  Action action;
  double reward = 0.0;
  double value = 0.0;        // ensemble value at the pre-action state
  double best_return = 0.0;  // best sampled plan return
};

struct UpdateRecord {
  long t = 0;
  int member = 0;
  double loss = 0.0;
  double mean_target = 0.0;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<UpdateRecord> updates;

  double total_reward() const;
  // mean reward over the final `window` steps
  double mean_reward_tail(long window) const;
};

// columns: t,x0..,a0..,reward,value,best_return
void write_steps_csv(const RunLog& log, std::ostream& os);
// columns: t,k,loss,mean_target
void write_updates_csv(const RunLog& log, std::ostream& os);

// Called once before the first step (t = 0) and after each update event with
// the current timestep and ensemble.
using UpdateHook = std::function<void(long, const ValueEnsemble&)>;

// The plan-online / learn-offline loop: act with the planner under the
// optimistic ensemble value, store visited states, and every Z steps run G
// update rounds, each fitting every member once on fresh N-step targets
// bootstrapped from that member's own value. Deterministic given cfg.seed.
RunLog polo_run(const EnvModel& env, const PoloConfig& cfg,
                const UpdateHook& on_update = {});

enum class BaselineKind {
  random,           // uniform actions, no learning
  greedy_ensemble,  // 1-step lookahead on the ensemble value, same learning
  mpc_no_value,     // planner with zero terminal value, no learning
};

RunLog baseline_run(const EnvModel& env, BaselineKind kind,
                    const PoloConfig& cfg, const UpdateHook& on_update = {});

}  // namespace polo
