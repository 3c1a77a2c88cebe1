#include "polo/core.hpp"

#include <cmath>

namespace polo {

StepResult step(const EnvModel& model, const State& s, const Action& a) {
  if (s.size() != model.state_dim()) {
    throw std::invalid_argument("step: state has dimension " +
                                std::to_string(s.size()) + ", model expects " +
                                std::to_string(model.state_dim()));
  }
  if (a.size() != model.action_dim()) {
    throw std::invalid_argument("step: action has dimension " +
                                std::to_string(a.size()) + ", model expects " +
                                std::to_string(model.action_dim()));
  }
  StepResult out = model.step(s, model.action_bounds().clamp(a));
  for (int i = 0; i < out.next.size(); ++i) {
    if (!std::isfinite(out.next[i])) {
      throw ModelFault("model produced non-finite state entry " +
                       std::to_string(i) + " (" +
                       std::to_string(out.next[i]) + ")");
    }
  }
  if (!std::isfinite(out.reward)) {
    throw ModelFault("model produced non-finite reward (" +
                     std::to_string(out.reward) + ")");
  }
  return out;
}

double discounted_return(std::span<const double> rewards, double gamma,
                         double terminal_value) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("discounted_return: gamma must be in [0,1)");
  }
  if (!std::isfinite(terminal_value)) {
    throw std::invalid_argument(
        "discounted_return: terminal value is not finite");
  }
  double total = 0.0;
  double disc = 1.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) {
      throw std::invalid_argument("discounted_return: reward is not finite");
    }
    total += disc * r;
    disc *= gamma;
  }
  return total + disc * terminal_value;
}

Trajectory rollout(const EnvModel& model, const State& start,
                   std::span<const Action> actions) {
  Trajectory traj;
  traj.states.reserve(actions.size() + 1);
  traj.actions.reserve(actions.size());
  traj.rewards.reserve(actions.size());
  traj.states.push_back(start);
  for (const Action& a : actions) {
    StepResult r = step(model, traj.states.back(), a);
    traj.actions.push_back(model.action_bounds().clamp(a));
    traj.rewards.push_back(r.reward);
    traj.states.push_back(std::move(r.next));
  }
  return traj;
}

}  // namespace polo
