#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polo/rng.hpp"

namespace polo {

// Explicit deterministic MDP: next state and reward per (state, action).
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> next;       // row-major, index s * num_actions + a
  std::vector<double> reward;  // same layout
  double gamma = 0.9;

  int next_state(int s, int a) const { return next[s * num_actions + a]; }
  double reward_at(int s, int a) const { return reward[s * num_actions + a]; }
  void validate() const;
};

using TabularValue = std::vector<double>;

struct TabularPolicy {
  std::vector<int> action;  // one action index per state
};

// Iterates V <- BV until ||dV||_inf < tol*(1-gamma)/gamma, which guarantees
// ||V - V*||_inf < tol.
TabularValue value_iteration(const TabularMDP& m, double tol = 1e-10);

// One application of the optimal Bellman backup.
TabularValue bellman_backup(const TabularMDP& m, const TabularValue& v);

// H-step backup computed as H applications of bellman_backup.
TabularValue bellman_h(const TabularMDP& m, const TabularValue& v, int horizon);

// Same quantity computed by explicit search over all |A|^H action sequences;
// the cross-check route for bellman_h.
TabularValue bellman_h_exhaustive(const TabularMDP& m, const TabularValue& v,
                                  int horizon);

// Greedy policy with respect to a value estimate; ties break to the lowest
// action index.
TabularPolicy greedy_policy(const TabularMDP& m, const TabularValue& v);

// Receding-horizon policy: at each state exhaustively scores all |A|^H
// sequences with terminal value v_hat and returns the first action of the
// best one. Ties break to the lexicographically smallest sequence.
TabularPolicy mpc_policy(const TabularMDP& m, const TabularValue& v_hat,
                         int horizon, long budget = 1000000);

// Exact value of receding-horizon control with block commitment: from each
// state, execute the full optimized H-step sequence, then re-plan. This is
// the execution the 2 gamma^H eps/(1-gamma^H) suboptimality bound covers;
// per-step re-planning only satisfies the looser 2 gamma^H eps/(1-gamma)
// bound. For H=1 both coincide with the greedy policy value.
TabularValue mpc_block_value(const TabularMDP& m, const TabularValue& v_hat,
                             int horizon, long budget = 1000000);

// V^pi by iterative policy evaluation, accurate to about tol in inf-norm.
TabularValue policy_eval(const TabularMDP& m, const TabularPolicy& pi,
                         double tol = 1e-12);

// J = E_{s ~ start_dist}[ v(s) ]
double performance(const TabularMDP& m, const TabularValue& v,
                   std::span<const double> start_dist);

// Uniformly random deterministic MDP with rewards in [-1, 1].
TabularMDP random_mdp(int num_states, int num_actions, double gamma,
                      RandomStream& rng);

// ---------------------------------------------------------------------------
// Suboptimality-bound verification
//
// With value error eps = ||v_hat - V*||_inf, the H-step receding-horizon
// policy built on v_hat satisfies J(pi*) - J(pi_hat) <= 2 gamma^H eps /
// (1 - gamma^H); H=1 is the plain greedy-policy bound 2 gamma eps / (1-gamma).
// ---------------------------------------------------------------------------

struct BoundCheckOptions {
  int trials = 100;
  int min_states = 2;
  int max_states = 10;
  int min_actions = 2;
  int max_actions = 4;
  double gamma = 0.9;
  double epsilon = 0.1;
  bool corner_noise = true;  // also sweep all +-eps corner perturbations
  double tolerance = 1e-9;
  std::uint64_t seed = 2024;
};

struct BoundViolation {
  int trial = 0;
  double gap = 0.0;
  double bound = 0.0;
  std::string note;
};

struct BoundReport {
  int trials = 0;
  double gamma = 0.0;
  double epsilon = 0.0;
  int horizon = 1;
  double max_gap = 0.0;
  double bound = 0.0;
  std::vector<BoundViolation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_json() const;
};

BoundReport check_mpc_bound(int horizon, const BoundCheckOptions& opts = {});
BoundReport check_greedy_bound(const BoundCheckOptions& opts = {});

// A 2-state instance whose greedy-policy gap equals the greedy bound (up to
// an arbitrarily small construction margin); exhibits tightness.
struct TightInstance {
  TabularMDP mdp;
  TabularValue v_hat;
  std::vector<double> start_dist;
  double expected_gap = 0.0;  // 2 gamma eps / (1 - gamma), minus the margin
};
TightInstance greedy_bound_tight_instance(double gamma, double epsilon);

// ---------------------------------------------------------------------------
// H-step contraction: ||B^H V1 - B^H V2||_inf <= gamma^H ||V1 - V2||_inf
// ---------------------------------------------------------------------------

struct ContractionReport {
  int trials = 0;
  int max_horizon = 1;
  int violations = 0;
  // worst observed lhs - gamma^H * rhs (negative when the inequality holds)
  double max_excess = 0.0;
  bool ok() const { return violations == 0; }
  std::string to_json() const;
};

ContractionReport check_contraction(int trials, int max_horizon,
                                    std::uint64_t seed, double tolerance = 1e-12);

}  // namespace polo
