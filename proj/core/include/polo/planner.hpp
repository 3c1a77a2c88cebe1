#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "polo/core.hpp"
#include "polo/rng.hpp"

namespace polo {

// Thrown when the terminal value function returns a non-finite number.
class PlannerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlannerConfig {
  int horizon = 64;           // H
  int rollouts = 120;         // R (ignored in exhaustive mode)
  double noise_sigma = 0.2;   // per action dimension
  double temperature = 1.25;  // tau
  double gamma = 0.99;
  bool warm_start = true;
  // Shrink factor applied to the shifted nominal on warm start. Values below
  // one relax a signal-less nominal back toward zero instead of letting it
  // saturate against the action bounds.
  double warm_start_decay = 1.0;
  // Refinement iterations per plan: each iteration resamples perturbations
  // around the updated nominal.
  int iterations = 1;
  // Non-empty: instead of Gaussian noise, enumerate every combination of
  // these perturbation values over steps and dimensions. Turns the planner
  // into exhaustive search for small discretized action sets.
  std::vector<double> exhaustive_noise;
  long exhaustive_budget = 1000000;
};

struct PlanResult {
  std::vector<Action> nominal;  // updated nominal sequence, clamped, length H
  Action first_action;          // nominal[0]
  double best_return = 0.0;     // max over sampled rollouts and the incoming nominal
  double weighted_return = 0.0; // softmax-weighted rollout return
  double nominal_return = 0.0;  // return of the incoming nominal sequence
};

using ValueFn = std::function<double(const State&)>;

// One iteration of exponential-weighting trajectory optimization: perturb the
// nominal action sequence, score each rollout by its discounted return plus
// gamma^H * terminal_value(s_H), and move the nominal toward the
// softmax-weighted perturbation. Deterministic given the stream state.
PlanResult mppi_plan(const EnvModel& model, const State& s,
                     const ValueFn& terminal_value, const PlannerConfig& cfg,
                     RandomStream& rng,
                     const std::vector<Action>* warm_nominal = nullptr);

// N-step regression target: plans over n_steps with the member's own value as
// the terminal and returns the best return among all evaluated action
// sequences (the incoming nominal included).
double nstep_target(const EnvModel& model, const State& s,
                    const ValueFn& member_value, int n_steps,
                    const PlannerConfig& cfg, RandomStream& rng);

// One-step lookahead: scores the zero action plus `action_samples` uniform
// candidates by r + gamma * value(s') and returns the argmax; ties break to
// the earliest candidate.
Action greedy_action(const EnvModel& model, const State& s,
                     const ValueFn& value, int action_samples, double gamma,
                     RandomStream& rng);

}  // namespace polo
