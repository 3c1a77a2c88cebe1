#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "polo/oracle.hpp"

using namespace polo;

namespace {

TabularMDP two_state_chain() {
  // s0 -> s1 (reward 0), s1 self-loop (reward 1); single action each... use
  // two identical actions to keep |A| >= 1 simple
  TabularMDP m;
  m.num_states = 2;
  m.num_actions = 1;
  m.gamma = 0.5;
  m.next = {1, 1};
  m.reward = {0.0, 1.0};
  m.validate();
  return m;
}

double max_abs_diff(const TabularValue& a, const TabularValue& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("value_iteration: single self-loop state gives r/(1-gamma)") {
  TabularMDP m;
  m.num_states = 1;
  m.num_actions = 1;
  m.gamma = 0.9;
  m.next = {0};
  m.reward = {0.7};
  const TabularValue v = value_iteration(m, 1e-10);
  CHECK(v[0] == doctest::Approx(0.7 / 0.1).epsilon(1e-9));
}

TEST_CASE("value_iteration: two-state chain solved by hand") {
  const TabularMDP m = two_state_chain();
  const TabularValue v = value_iteration(m, 1e-12);
  CHECK(v[1] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("value_iteration: fixed-point residual on random MDPs") {
  RandomStream rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const TabularMDP m = random_mdp(20, 3, 0.9, rng);
    const TabularValue v = value_iteration(m, 1e-10);
    const TabularValue bv = bellman_backup(m, v);
    CHECK(max_abs_diff(v, bv) < 1e-9);
  }
}

TEST_CASE("bellman_h: H=1 matches a single backup") {
  RandomStream rng(12);
  const TabularMDP m = random_mdp(8, 3, 0.85, rng);
  TabularValue v(8);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  const TabularValue a = bellman_h(m, v, 1);
  const TabularValue b = bellman_backup(m, v);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("bellman_h: V* is a fixed point for every H") {
  RandomStream rng(13);
  const TabularMDP m = random_mdp(10, 3, 0.9, rng);
  const TabularValue v_star = value_iteration(m, 1e-12);
  for (int h : {1, 2, 5}) {
    const TabularValue bh = bellman_h(m, v_star, h);
    CHECK(max_abs_diff(bh, v_star) < 1e-10);
  }
}

TEST_CASE("bellman_h: gamma^H contraction on random pairs") {
  RandomStream rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const TabularMDP m = random_mdp(2 + rng.uniform_int(9), 2 + rng.uniform_int(3),
                                    rng.uniform(0.3, 0.99), rng);
    TabularValue v1(m.num_states), v2(m.num_states);
    for (int s = 0; s < m.num_states; ++s) {
      v1[s] = rng.uniform(-5.0, 5.0);
      v2[s] = rng.uniform(-5.0, 5.0);
    }
    const int h = 4;
    const double lhs = max_abs_diff(bellman_h(m, v1, h), bellman_h(m, v2, h));
    const double rhs = std::pow(m.gamma, h) * max_abs_diff(v1, v2);
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("bellman_h: iterated backups equal exhaustive sequence search") {
  RandomStream rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const TabularMDP m = random_mdp(6, 3, 0.9, rng);
    TabularValue v(6);
    for (auto& x : v) x = rng.uniform(-3.0, 3.0);
    for (int h : {1, 2, 3, 4}) {
      const TabularValue a = bellman_h(m, v, h);
      const TabularValue b = bellman_h_exhaustive(m, v, h);
      CHECK(max_abs_diff(a, b) <= 1e-12);
    }
  }
}

TEST_CASE("mpc_policy: H=1 is the greedy policy") {
  RandomStream rng(16);
  const TabularMDP m = random_mdp(12, 4, 0.9, rng);
  TabularValue v(12);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  const TabularPolicy a = mpc_policy(m, v, 1);
  const TabularPolicy b = greedy_policy(m, v);
  CHECK(a.action == b.action);
}

TEST_CASE("mpc_policy: with V* the policy performs exactly like pi*") {
  RandomStream rng(17);
  const TabularMDP m = random_mdp(9, 3, 0.9, rng);
  const TabularValue v_star = value_iteration(m, 1e-12);
  std::vector<double> beta(9, 1.0 / 9.0);
  const double j_star = performance(m, v_star, beta);
  for (int h : {1, 2, 3}) {
    const TabularPolicy pi = mpc_policy(m, v_star, h);
    const TabularValue v_pi = policy_eval(m, pi);
    CHECK(performance(m, v_pi, beta) == doctest::Approx(j_star).epsilon(1e-9));
  }
}

TEST_CASE("mpc_policy: performance is monotone when terminal is V*") {
  RandomStream rng(117);
  for (int trial = 0; trial < 5; ++trial) {
    const TabularMDP m = random_mdp(7, 3, 0.9, rng);
    const TabularValue v_star = value_iteration(m, 1e-12);
    std::vector<double> beta(7, 1.0 / 7.0);
    double prev = -1e18;
    for (int h = 1; h <= 4; ++h) {
      const TabularValue v_pi = policy_eval(m, mpc_policy(m, v_star, h));
      const double j = performance(m, v_pi, beta);
      CHECK(j >= prev - 1e-9);
      prev = j;
    }
  }
}

TEST_CASE("mpc_policy: budget guard rejects huge searches") {
  RandomStream rng(18);
  const TabularMDP m = random_mdp(4, 10, 0.9, rng);
  TabularValue v(4, 0.0);
  CHECK_THROWS_AS(mpc_policy(m, v, 8, 1000), std::invalid_argument);
  try {
    mpc_policy(m, v, 8, 1000);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("smaller horizon") != std::string::npos);
  }
}

TEST_CASE("policy_eval: greedy on V* reproduces V*") {
  RandomStream rng(19);
  const TabularMDP m = random_mdp(10, 3, 0.9, rng);
  const TabularValue v_star = value_iteration(m, 1e-12);
  const TabularValue v_pi = policy_eval(m, greedy_policy(m, v_star));
  CHECK(max_abs_diff(v_pi, v_star) < 1e-9);
}

TEST_CASE("policy_eval: Bellman consistency residual") {
  RandomStream rng(20);
  const TabularMDP m = random_mdp(15, 4, 0.95, rng);
  TabularPolicy pi;
  pi.action.resize(15);
  for (auto& a : pi.action) a = rng.uniform_int(4);
  const TabularValue v = policy_eval(m, pi, 1e-12);
  for (int s = 0; s < 15; ++s) {
    const int a = pi.action[s];
    const double rhs = m.reward_at(s, a) + m.gamma * v[m.next_state(s, a)];
    CHECK(std::abs(v[s] - rhs) < 1e-10);
  }
}

TEST_CASE("performance: uniform average of state values") {
  TabularMDP m = two_state_chain();
  const TabularValue v{1.0, 3.0};
  const std::vector<double> beta{0.5, 0.5};
  CHECK(performance(m, v, beta) == 2.0);
}

TEST_CASE("greedy bound: zero error gives zero gap") {
  RandomStream rng(21);
  const TabularMDP m = random_mdp(8, 3, 0.9, rng);
  const TabularValue v_star = value_iteration(m, 1e-12);
  std::vector<double> beta(8, 1.0 / 8.0);
  const TabularValue v_pi = policy_eval(m, greedy_policy(m, v_star));
  const double gap = performance(m, v_star, beta) - performance(m, v_pi, beta);
  CHECK(std::abs(gap) < 1e-9);
}

TEST_CASE("greedy bound: holds over random MDPs and corner noise") {
  BoundCheckOptions opts;
  opts.trials = 30;
  const BoundReport report = check_greedy_bound(opts);
  CHECK(report.ok());
  CHECK(report.horizon == 1);
  CHECK(report.bound == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(report.max_gap <= report.bound + 1e-9);
  CHECK(report.max_gap > 0.0);
}

TEST_CASE("greedy bound: constructed tight instance achieves the bound") {
  const TightInstance inst = greedy_bound_tight_instance(0.9, 0.1);
  const TabularValue v_star = value_iteration(inst.mdp, 1e-12);
  // the estimate is eps away from V* in inf norm
  double eps_actual = 0.0;
  for (int s = 0; s < 2; ++s) {
    eps_actual = std::max(eps_actual, std::abs(inst.v_hat[s] - v_star[s]));
  }
  CHECK(eps_actual == doctest::Approx(0.1).epsilon(1e-9));
  // gap validated numerically by policy evaluation
  const TabularPolicy pi = greedy_policy(inst.mdp, inst.v_hat);
  const TabularValue v_pi = policy_eval(inst.mdp, pi);
  const double gap = performance(inst.mdp, v_star, inst.start_dist) -
                     performance(inst.mdp, v_pi, inst.start_dist);
  CHECK(std::abs(gap - 1.8) <= 1e-9);
  CHECK(gap <= 1.8 + 1e-9);
}

TEST_CASE("mpc bound: tighter than the greedy bound and respected") {
  BoundCheckOptions opts;
  opts.trials = 20;
  const BoundReport h1 = check_mpc_bound(1, opts);
  const BoundReport h4 = check_mpc_bound(4, opts);
  CHECK(h1.ok());
  CHECK(h4.ok());
  // bound dominance: 2 g^H eps/(1-g^H) decreases in H
  CHECK(h4.bound < h1.bound);
  // measured gaps respect the tighter bound at H=4
  CHECK(h4.max_gap <= h4.bound + 1e-9);
}

TEST_CASE("mpc_block_value: H=1 equals the greedy policy value") {
  RandomStream rng(31);
  const TabularMDP m = random_mdp(9, 3, 0.9, rng);
  TabularValue v(9);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  const TabularValue u = mpc_block_value(m, v, 1);
  const TabularValue v_pi = policy_eval(m, greedy_policy(m, v));
  for (int s = 0; s < 9; ++s) CHECK(u[s] == doctest::Approx(v_pi[s]).epsilon(1e-10));
}

TEST_CASE("mpc_block_value: exact with V* as terminal") {
  RandomStream rng(32);
  const TabularMDP m = random_mdp(8, 3, 0.9, rng);
  const TabularValue v_star = value_iteration(m, 1e-12);
  for (int h : {1, 2, 3}) {
    const TabularValue u = mpc_block_value(m, v_star, h);
    CHECK(max_abs_diff(u, v_star) < 1e-9);
  }
}

TEST_CASE("per-step replanning satisfies the looser horizon bound") {
  // first-action re-planning is greedy w.r.t. B^{H-1} v_hat, whose error is
  // gamma^{H-1} eps, so its gap obeys 2 gamma^H eps / (1 - gamma)
  RandomStream rng(33);
  const double eps = 0.1;
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMDP m = random_mdp(2 + rng.uniform_int(7), 3, 0.9, rng);
    const TabularValue v_star = value_iteration(m, 1e-12);
    TabularValue v_hat(m.num_states);
    for (int s = 0; s < m.num_states; ++s) {
      v_hat[s] = v_star[s] + rng.uniform(-eps, eps);
    }
    std::vector<double> beta(m.num_states, 1.0 / m.num_states);
    const int h = 3;
    const TabularValue v_pi = policy_eval(m, mpc_policy(m, v_hat, h));
    const double gap = performance(m, v_star, beta) - performance(m, v_pi, beta);
    const double loose_bound = 2.0 * std::pow(0.9, h) * eps / (1.0 - 0.9);
    CHECK(gap <= loose_bound + 1e-9);
  }
}

TEST_CASE("contraction report: no violations over random triples") {
  const ContractionReport report = check_contraction(200, 5, 99);
  CHECK(report.ok());
  CHECK(report.max_excess <= 1e-12);
}

TEST_CASE("bound report serializes the spec fields") {
  BoundCheckOptions opts;
  opts.trials = 2;
  opts.corner_noise = false;
  const BoundReport report = check_greedy_bound(opts);
  const std::string j = report.to_json();
  for (const char* key :
       {"\"trials\"", "\"gamma\"", "\"epsilon\"", "\"H\"", "\"max_gap\"",
        "\"bound\"", "\"violations\""}) {
    CHECK(j.find(key) != std::string::npos);
  }
}
