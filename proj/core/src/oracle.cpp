#include "polo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace polo {

using nlohmann::json;

void TabularMDP::validate() const {
  if (num_states <= 0 || num_actions <= 0) {
    throw std::invalid_argument("TabularMDP: empty state or action set");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("TabularMDP: gamma must be in [0,1)");
  }
  const std::size_t n = static_cast<std::size_t>(num_states) * num_actions;
  if (next.size() != n || reward.size() != n) {
    throw std::invalid_argument("TabularMDP: table size mismatch");
  }
  for (int v : next) {
    if (v < 0 || v >= num_states) {
      throw std::invalid_argument("TabularMDP: next-state index out of range");
    }
  }
}

TabularValue bellman_backup(const TabularMDP& m, const TabularValue& v) {
  TabularValue out(m.num_states);
  for (int s = 0; s < m.num_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < m.num_actions; ++a) {
      const double q = m.reward_at(s, a) + m.gamma * v[m.next_state(s, a)];
      best = std::max(best, q);
    }
    out[s] = best;
  }
  return out;
}

TabularValue value_iteration(const TabularMDP& m, double tol) {
  if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be > 0");
  TabularValue v(m.num_states, 0.0);
  // ||V_k - V*|| <= gamma/(1-gamma) ||V_k - V_{k-1}||, so this threshold
  // guarantees ||V - V*||_inf < tol.
  const double threshold =
      m.gamma > 0.0 ? tol * (1.0 - m.gamma) / m.gamma
                    : std::numeric_limits<double>::infinity();
  for (;;) {
    TabularValue next = bellman_backup(m, v);
    double delta = 0.0;
    for (int s = 0; s < m.num_states; ++s) {
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v = std::move(next);
    if (delta < threshold) break;
  }
  return v;
}

TabularValue bellman_h(const TabularMDP& m, const TabularValue& v, int horizon) {
  if (horizon < 1) throw std::invalid_argument("bellman_h: horizon must be >= 1");
  TabularValue out = v;
  for (int i = 0; i < horizon; ++i) out = bellman_backup(m, out);
  return out;
}

namespace {

// Best over action sequences of length `depth` starting at s, with terminal v.
double best_sequence_return(const TabularMDP& m, const TabularValue& v, int s,
                            int depth) {
  if (depth == 0) return v[s];
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < m.num_actions; ++a) {
    const double q =
        m.reward_at(s, a) +
        m.gamma * best_sequence_return(m, v, m.next_state(s, a), depth - 1);
    best = std::max(best, q);
  }
  return best;
}

}  // namespace

TabularValue bellman_h_exhaustive(const TabularMDP& m, const TabularValue& v,
                                  int horizon) {
  if (horizon < 1) {
    throw std::invalid_argument("bellman_h_exhaustive: horizon must be >= 1");
  }
  TabularValue out(m.num_states);
  for (int s = 0; s < m.num_states; ++s) {
    out[s] = best_sequence_return(m, v, s, horizon);
  }
  return out;
}

TabularPolicy greedy_policy(const TabularMDP& m, const TabularValue& v) {
  TabularPolicy pi;
  pi.action.resize(m.num_states, 0);
  for (int s = 0; s < m.num_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < m.num_actions; ++a) {
      const double q = m.reward_at(s, a) + m.gamma * v[m.next_state(s, a)];
      if (q > best) {
        best = q;
        pi.action[s] = a;
      }
    }
  }
  return pi;
}

namespace {

struct BlockPlan {
  int first_action = 0;
  double block_reward = 0.0;  // sum gamma^t r_t along the chosen sequence
  int end_state = 0;
};

// DFS over all |A|^depth sequences in action-index order; strict improvement
// keeps the lexicographically smallest optimal sequence.
void best_block_search(const TabularMDP& m, const TabularValue& v_hat, int s,
                       int depth, double acc, double disc, int first,
                       double& best_score, BlockPlan& best) {
  if (depth == 0) {
    const double score = acc + disc * v_hat[s];
    if (score > best_score) {
      best_score = score;
      best.first_action = first;
      best.block_reward = acc;
      best.end_state = s;
    }
    return;
  }
  for (int a = 0; a < m.num_actions; ++a) {
    best_block_search(m, v_hat, m.next_state(s, a), depth - 1,
                      acc + disc * m.reward_at(s, a), disc * m.gamma,
                      first < 0 ? a : first, best_score, best);
  }
}

BlockPlan plan_block(const TabularMDP& m, const TabularValue& v_hat, int s,
                     int horizon) {
  double best_score = -std::numeric_limits<double>::infinity();
  BlockPlan best;
  best_block_search(m, v_hat, s, horizon, 0.0, 1.0, -1, best_score, best);
  return best;
}

void check_budget(const TabularMDP& m, int horizon, long budget,
                  const char* who) {
  if (horizon < 1) {
    throw std::invalid_argument(std::string(who) + ": horizon must be >= 1");
  }
  const double sequences =
      std::pow(static_cast<double>(m.num_actions), horizon);
  if (sequences > static_cast<double>(budget)) {
    throw std::invalid_argument(
        std::string(who) + ": |A|^H = " + std::to_string(sequences) +
        " exceeds the budget of " + std::to_string(budget) +
        " sequences; use a smaller horizon H");
  }
}

}  // namespace

TabularPolicy mpc_policy(const TabularMDP& m, const TabularValue& v_hat,
                         int horizon, long budget) {
  check_budget(m, horizon, budget, "mpc_policy");
  TabularPolicy pi;
  pi.action.resize(m.num_states, 0);
  for (int s = 0; s < m.num_states; ++s) {
    pi.action[s] = plan_block(m, v_hat, s, horizon).first_action;
  }
  return pi;
}

TabularValue mpc_block_value(const TabularMDP& m, const TabularValue& v_hat,
                             int horizon, long budget) {
  check_budget(m, horizon, budget, "mpc_block_value");
  std::vector<BlockPlan> plans(m.num_states);
  for (int s = 0; s < m.num_states; ++s) {
    plans[s] = plan_block(m, v_hat, s, horizon);
  }
  // U(s) = R_H(s) + gamma^H U(end(s)); contraction with factor gamma^H
  const double gh = std::pow(m.gamma, horizon);
  TabularValue u(m.num_states, 0.0);
  const double threshold =
      gh > 0.0 ? 1e-12 * (1.0 - gh) / gh
               : std::numeric_limits<double>::infinity();
  for (;;) {
    double delta = 0.0;
    TabularValue next(m.num_states);
    for (int s = 0; s < m.num_states; ++s) {
      next[s] = plans[s].block_reward + gh * u[plans[s].end_state];
      delta = std::max(delta, std::abs(next[s] - u[s]));
    }
    u = std::move(next);
    if (delta < threshold) break;
  }
  return u;
}

TabularValue policy_eval(const TabularMDP& m, const TabularPolicy& pi,
                         double tol) {
  if (static_cast<int>(pi.action.size()) != m.num_states) {
    throw std::invalid_argument("policy_eval: policy size mismatch");
  }
  TabularValue v(m.num_states, 0.0);
  const double threshold =
      m.gamma > 0.0 ? tol * (1.0 - m.gamma) / m.gamma
                    : std::numeric_limits<double>::infinity();
  for (;;) {
    double delta = 0.0;
    TabularValue next(m.num_states);
    for (int s = 0; s < m.num_states; ++s) {
      const int a = pi.action[s];
      next[s] = m.reward_at(s, a) + m.gamma * v[m.next_state(s, a)];
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v = std::move(next);
    if (delta < threshold) break;
  }
  return v;
}

double performance(const TabularMDP& m, const TabularValue& v,
                   std::span<const double> start_dist) {
  if (static_cast<int>(start_dist.size()) != m.num_states) {
    throw std::invalid_argument("performance: distribution size mismatch");
  }
  double j = 0.0;
  for (int s = 0; s < m.num_states; ++s) j += start_dist[s] * v[s];
  return j;
}

TabularMDP random_mdp(int num_states, int num_actions, double gamma,
                      RandomStream& rng) {
  TabularMDP m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.gamma = gamma;
  m.next.resize(static_cast<std::size_t>(num_states) * num_actions);
  m.reward.resize(m.next.size());
  for (std::size_t i = 0; i < m.next.size(); ++i) {
    m.next[i] = rng.uniform_int(num_states);
    m.reward[i] = rng.uniform(-1.0, 1.0);
  }
  return m;
}

namespace {

double max_abs_diff(const TabularValue& a, const TabularValue& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
  }
  return d;
}

json violation_to_json(const BoundViolation& v) {
  return json{{"trial", v.trial}, {"gap", v.gap}, {"bound", v.bound},
              {"note", v.note}};
}

// Evaluates one perturbed value estimate: computes the exact value of
// H-step receding-horizon control built on v_hat and records the
// performance gap.
void run_bound_case(const TabularMDP& m, const TabularValue& v_star,
                    const TabularValue& v_hat,
                    const std::vector<double>& start_dist, int horizon,
                    int trial, const std::string& note, BoundReport& report,
                    double tolerance) {
  const TabularValue u = mpc_block_value(m, v_hat, horizon);
  const double gap = performance(m, v_star, start_dist) -
                     performance(m, u, start_dist);
  report.max_gap = std::max(report.max_gap, gap);
  if (gap > report.bound + tolerance) {
    report.violations.push_back({trial, gap, report.bound, note});
  }
}

}  // namespace

BoundReport check_mpc_bound(int horizon, const BoundCheckOptions& opts) {
  if (horizon < 1) throw std::invalid_argument("check_mpc_bound: horizon >= 1");
  BoundReport report;
  report.trials = opts.trials;
  report.gamma = opts.gamma;
  report.epsilon = opts.epsilon;
  report.horizon = horizon;
  const double gh = std::pow(opts.gamma, horizon);
  report.bound = 2.0 * gh * opts.epsilon / (1.0 - gh);

  RandomStream rng(derive_seed(opts.seed, 17));
  for (int trial = 0; trial < opts.trials; ++trial) {
    const int ns = opts.min_states + rng.uniform_int(opts.max_states -
                                                     opts.min_states + 1);
    const int na = opts.min_actions + rng.uniform_int(opts.max_actions -
                                                      opts.min_actions + 1);
    const TabularMDP m = random_mdp(ns, na, opts.gamma, rng);
    const TabularValue v_star = value_iteration(m, 1e-12);
    std::vector<double> uniform(ns, 1.0 / ns);

    // uniform noise draw in [-eps, eps]
    TabularValue v_hat(ns);
    for (int s = 0; s < ns; ++s) {
      v_hat[s] = v_star[s] + rng.uniform(-opts.epsilon, opts.epsilon);
    }
    run_bound_case(m, v_star, v_hat, uniform, horizon, trial, "uniform",
                   report, opts.tolerance);

    // adversarial corners: every +-eps sign pattern
    if (opts.corner_noise && ns <= 10) {
      const unsigned corners = 1u << ns;
      for (unsigned mask = 0; mask < corners; ++mask) {
        for (int s = 0; s < ns; ++s) {
          v_hat[s] = v_star[s] +
                     ((mask >> s) & 1u ? opts.epsilon : -opts.epsilon);
        }
        run_bound_case(m, v_star, v_hat, uniform, horizon, trial, "corner",
                       report, opts.tolerance);
      }
    }
  }
  return report;
}

BoundReport check_greedy_bound(const BoundCheckOptions& opts) {
  return check_mpc_bound(1, opts);
}

TightInstance greedy_bound_tight_instance(double gamma, double epsilon) {
  if (!(gamma > 0.0 && gamma < 1.0) || epsilon <= 0.0) {
    throw std::invalid_argument("tight instance: need gamma in (0,1), eps > 0");
  }
  // States {0, 1}. Action 0 self-loops with reward 0 at state 0 and reward c
  // at state 1; action 1 moves to the other state (reward 0 from state 0,
  // reward c from state 1). With c slightly below 2*eps, the estimate
  //   v_hat = V* + (eps at state 0, -eps at state 1)
  // makes the greedy policy stay at state 0 and forfeit c gamma/(1-gamma),
  // which approaches the bound 2 gamma eps/(1-gamma) as c -> 2*eps. The
  // margin keeps the greedy comparison strictly decided in floating point.
  const double margin = 1e-11;
  const double c = 2.0 * epsilon - margin;

  TightInstance inst;
  inst.mdp.num_states = 2;
  inst.mdp.num_actions = 2;
  inst.mdp.gamma = gamma;
  inst.mdp.next = {0, 1,   // state 0: stay, go
                   0, 1};  // state 1: go back, stay
  inst.mdp.reward = {0.0, 0.0,  // leaving state 0 earns nothing
                     c, c};     // any action taken at state 1 earns c
  inst.mdp.validate();

  // V*(1) = c/(1-gamma) (stay), V*(0) = gamma V*(1).
  const double v1 = c / (1.0 - gamma);
  const double v0 = gamma * v1;
  inst.v_hat = {v0 + epsilon, v1 - epsilon};
  inst.start_dist = {1.0, 0.0};
  inst.expected_gap = gamma * c / (1.0 - gamma);
  return inst;
}

ContractionReport check_contraction(int trials, int max_horizon,
                                    std::uint64_t seed, double tolerance) {
  ContractionReport report;
  report.trials = trials;
  report.max_horizon = max_horizon;
  report.max_excess = -std::numeric_limits<double>::infinity();

  RandomStream rng(derive_seed(seed, 23));
  for (int trial = 0; trial < trials; ++trial) {
    const int ns = 2 + rng.uniform_int(9);
    const int na = 2 + rng.uniform_int(3);
    const double gamma = rng.uniform(0.3, 0.99);
    const TabularMDP m = random_mdp(ns, na, gamma, rng);
    TabularValue v1(ns), v2(ns);
    for (int s = 0; s < ns; ++s) {
      v1[s] = rng.uniform(-5.0, 5.0);
      v2[s] = rng.uniform(-5.0, 5.0);
    }
    const double d0 = max_abs_diff(v1, v2);
    TabularValue b1 = v1, b2 = v2;
    for (int h = 1; h <= max_horizon; ++h) {
      b1 = bellman_backup(m, b1);
      b2 = bellman_backup(m, b2);
      const double lhs = max_abs_diff(b1, b2);
      const double rhs = std::pow(gamma, h) * d0;
      report.max_excess = std::max(report.max_excess, lhs - rhs);
      if (lhs > rhs + tolerance) ++report.violations;
    }
  }
  return report;
}

std::string BoundReport::to_json() const {
  json j;
  j["trials"] = trials;
  j["gamma"] = gamma;
  j["epsilon"] = epsilon;
  j["H"] = horizon;
  j["max_gap"] = max_gap;
  j["bound"] = bound;
  j["violations"] = json::array();
  for (const auto& v : violations) j["violations"].push_back(violation_to_json(v));
  return j.dump(2);
}

std::string ContractionReport::to_json() const {
  json j;
  j["trials"] = trials;
  j["max_horizon"] = max_horizon;
  j["violations"] = violations;
  j["max_excess"] = max_excess;
  return j.dump(2);
}

}  // namespace polo
