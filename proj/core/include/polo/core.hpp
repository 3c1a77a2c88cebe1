#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polo {

using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;

// Thrown when a dynamics model emits a non-finite state or reward.
class ModelFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-dimension box [lo, hi].
struct Bounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }

  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }

  static Bounds symmetric(int dim, double magnitude) {
    Bounds b;
    b.lo = Eigen::VectorXd::Constant(dim, -magnitude);
    b.hi = Eigen::VectorXd::Constant(dim, magnitude);
    return b;
  }
};

struct StepResult {
  State next;
  double reward = 0.0;
};

// Deterministic dynamics + reward model. Implementations carry no mutable
// internal state: the current state is always an explicit argument, so the
// agent can replay any state it has visited. step() may assume a clamped,
// correctly sized action; use polo::step() for the checked entry point.
class EnvModel {
 public:
  virtual ~EnvModel() = default;

  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual const Bounds& action_bounds() const = 0;
  virtual double discount() const = 0;
  virtual State initial_state() const = 0;
  virtual StepResult step(const State& s, const Action& a) const = 0;

  // Inputs fed to value networks. Default: the raw state.
  virtual Eigen::VectorXd value_features(const State& s) const { return s; }
  // Nominal per-dimension ranges of value_features, used for input scaling.
  virtual Bounds feature_ranges() const = 0;
};

// Checked step: validates dimensions, clamps the action to bounds, and
// verifies the model output is finite.
StepResult step(const EnvModel& model, const State& s, const Action& a);

// Sum_{t<H} gamma^t r_t + gamma^H * terminal_value.
double discounted_return(std::span<const double> rewards, double gamma,
                         double terminal_value);

struct Trajectory {
  std::vector<State> states;    // length H+1
  std::vector<Action> actions;  // length H
  std::vector<double> rewards;  // length H
};

Trajectory rollout(const EnvModel& model, const State& start,
                   std::span<const Action> actions);

}  // namespace polo
