#include "polo/planner.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace polo {

namespace {

std::string describe_state(const State& s) {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

double checked_value(const ValueFn& value, const State& s) {
  const double v = value(s);
  if (!std::isfinite(v)) {
    throw PlannerError("terminal value is not finite at state " +
                       describe_state(s));
  }
  return v;
}

// Discounted return of clamp(nominal + eps) simulated on the model.
// eps == nullptr scores the nominal itself.
double score_rollout(const EnvModel& model, const State& start,
                     const std::vector<Action>& nominal,
                     const Eigen::MatrixXd* eps, const ValueFn& value,
                     const PlannerConfig& cfg) {
  const Bounds& bounds = model.action_bounds();
  State s = start;
  double total = 0.0;
  double disc = 1.0;
  for (int t = 0; t < cfg.horizon; ++t) {
    Action a = nominal[t];
    if (eps) a += eps->row(t).transpose();
    StepResult r = step(model, s, bounds.clamp(a));
    total += disc * r.reward;
    disc *= cfg.gamma;
    s = std::move(r.next);
  }
  return total + disc * checked_value(value, s);
}

}  // namespace

PlanResult mppi_plan(const EnvModel& model, const State& s,
                     const ValueFn& terminal_value, const PlannerConfig& cfg,
                     RandomStream& rng, const std::vector<Action>* warm_nominal) {
  if (cfg.horizon < 1) {
    throw std::invalid_argument("mppi_plan: horizon must be >= 1");
  }
  if (cfg.temperature <= 0.0) {
    throw std::invalid_argument("mppi_plan: temperature must be > 0");
  }
  const int dim = model.action_dim();
  const int h = cfg.horizon;

  // nominal: warm start shifts the previous plan by one step and repeats the
  // final action; otherwise zeros
  std::vector<Action> nominal(h, Action::Zero(dim));
  if (cfg.warm_start && warm_nominal && !warm_nominal->empty()) {
    const auto& prev = *warm_nominal;
    for (int t = 0; t < h; ++t) {
      const std::size_t src = std::min(static_cast<std::size_t>(t) + 1,
                                       prev.size() - 1);
      nominal[t] = cfg.warm_start_decay * prev[src];
    }
  }

  // perturbations: either R Gaussian draws or every combination of the
  // exhaustive noise values across steps and dimensions
  int rollouts = cfg.rollouts;
  const bool exhaustive = !cfg.exhaustive_noise.empty();
  if (exhaustive) {
    const double combos =
        std::pow(static_cast<double>(cfg.exhaustive_noise.size()),
                 static_cast<double>(h) * dim);
    if (combos > static_cast<double>(cfg.exhaustive_budget)) {
      throw std::invalid_argument(
          "mppi_plan: exhaustive noise needs " + std::to_string(combos) +
          " rollouts, over the budget of " +
          std::to_string(cfg.exhaustive_budget) +
          "; use a smaller horizon or noise set");
    }
    rollouts = static_cast<int>(combos);
  }
  if (rollouts < 1) {
    throw std::invalid_argument("mppi_plan: need at least one rollout");
  }

  const double nominal_return =
      score_rollout(model, s, nominal, nullptr, terminal_value, cfg);
  double best_return = nominal_return;
  double weighted_return = nominal_return;

  const int iterations = std::max(1, cfg.iterations);
  std::vector<Eigen::MatrixXd> eps(rollouts);
  std::vector<double> returns(rollouts);
  std::vector<double> weights(rollouts);
  for (int iter = 0; iter < iterations; ++iter) {
    for (int i = 0; i < rollouts; ++i) {
      eps[i].resize(h, dim);
      if (exhaustive) {
        const int base = static_cast<int>(cfg.exhaustive_noise.size());
        long code = i;
        for (int t = 0; t < h; ++t) {
          for (int d = 0; d < dim; ++d) {
            eps[i](t, d) = cfg.exhaustive_noise[code % base];
            code /= base;
          }
        }
      } else {
        for (int t = 0; t < h; ++t) {
          for (int d = 0; d < dim; ++d) {
            eps[i](t, d) = rng.normal(0.0, cfg.noise_sigma);
          }
        }
      }
      returns[i] = score_rollout(model, s, nominal, &eps[i], terminal_value, cfg);
    }

    // max-subtracted exponential weights; overflow-free for any return scale
    const double best_rollout =
        *std::max_element(returns.begin(), returns.end());
    double weight_sum = 0.0;
    for (int i = 0; i < rollouts; ++i) {
      weights[i] = std::exp((returns[i] - best_rollout) / cfg.temperature);
      weight_sum += weights[i];
    }
    weighted_return = 0.0;
    for (int i = 0; i < rollouts; ++i) {
      weighted_return += weights[i] / weight_sum * returns[i];
    }
    for (int t = 0; t < h; ++t) {
      Action delta = Action::Zero(dim);
      for (int i = 0; i < rollouts; ++i) {
        delta += (weights[i] / weight_sum) * eps[i].row(t).transpose();
      }
      nominal[t] += delta;
    }
    best_return = std::max(best_return, best_rollout);
  }

  PlanResult result;
  result.nominal.resize(h);
  const Bounds& bounds = model.action_bounds();
  for (int t = 0; t < h; ++t) {
    result.nominal[t] = bounds.clamp(nominal[t]);
  }
  result.first_action = result.nominal[0];
  result.best_return = best_return;
  result.weighted_return = weighted_return;
  result.nominal_return = nominal_return;
  return result;
}

double nstep_target(const EnvModel& model, const State& s,
                    const ValueFn& member_value, int n_steps,
                    const PlannerConfig& cfg, RandomStream& rng) {
  if (n_steps < 1) {
    throw std::invalid_argument("nstep_target: need at least one step");
  }
  PlannerConfig target_cfg = cfg;
  target_cfg.horizon = n_steps;
  target_cfg.warm_start = false;
  const PlanResult plan = mppi_plan(model, s, member_value, target_cfg, rng);
  return plan.best_return;
}

Action greedy_action(const EnvModel& model, const State& s, const ValueFn& value,
                     int action_samples, double gamma, RandomStream& rng) {
  const Bounds& bounds = model.action_bounds();
  const int dim = model.action_dim();

  Action best = Action::Zero(dim);
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= action_samples; ++i) {
    Action a(dim);
    if (i == 0) {
      a.setZero();
    } else {
      for (int d = 0; d < dim; ++d) {
        a[d] = rng.uniform(bounds.lo[d], bounds.hi[d]);
      }
    }
    const StepResult r = step(model, s, a);
    const double score = r.reward + gamma * checked_value(value, r.next);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return bounds.clamp(best);
}

}  // namespace polo
