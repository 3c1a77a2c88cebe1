#include <doctest.h>

#include <cmath>

#include "polo/core.hpp"
#include "polo/envs.hpp"
#include "polo/rng.hpp"

using namespace polo;

namespace {

// minimal 1-D model for error-path tests: x' = x + a, reward = a
class LineModel : public EnvModel {
 public:
  LineModel() { bounds_ = Bounds::symmetric(1, 1.0); }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  const Bounds& action_bounds() const override { return bounds_; }
  double discount() const override { return 0.9; }
  State initial_state() const override { return State::Zero(1); }
  StepResult step(const State& s, const Action& a) const override {
    StepResult r;
    r.next = s + a;
    r.reward = a[0];
    return r;
  }
  Bounds feature_ranges() const override { return Bounds::symmetric(1, 10.0); }

 private:
  Bounds bounds_;
};

class BrokenModel final : public LineModel {
 public:
  StepResult step(const State&, const Action&) const override {
    StepResult r;
    r.next = State::Constant(1, std::nan(""));
    r.reward = 0.0;
    return r;
  }
};

}  // namespace

TEST_CASE("discounted_return: empty rewards returns the terminal value") {
  CHECK(discounted_return({}, 0.9, 3.5) == 3.5);
  CHECK(discounted_return({}, 0.0, -1.0) == -1.0);
}

TEST_CASE("discounted_return: short hand-computed series") {
  const double rewards[] = {1.0, 1.0, 1.0};
  CHECK(discounted_return(rewards, 0.5, 0.0) == doctest::Approx(1.75).epsilon(1e-15));
}

TEST_CASE("discounted_return: matches the geometric-series closed form") {
  // constant reward r for 64 steps: r (1-g^64)/(1-g) + g^64 v
  const double r = 0.37, g = 0.99, v = -2.5;
  std::vector<double> rewards(64, r);
  const double expected = r * (1.0 - std::pow(g, 64)) / (1.0 - g) +
                          std::pow(g, 64) * v;
  CHECK(discounted_return(rewards, g, v) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("discounted_return: linear in rewards and terminal value") {
  RandomStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + rng.uniform_int(10);
    std::vector<double> r1(h), r2(h), mix(h);
    const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    for (int t = 0; t < h; ++t) {
      r1[t] = rng.uniform(-1.0, 1.0);
      r2[t] = rng.uniform(-1.0, 1.0);
      mix[t] = a * r1[t] + b * r2[t];
    }
    const double v1 = rng.uniform(-1.0, 1.0), v2 = rng.uniform(-1.0, 1.0);
    const double g = rng.uniform(0.0, 0.99);
    const double lhs = discounted_return(mix, g, a * v1 + b * v2);
    const double rhs =
        a * discounted_return(r1, g, v1) + b * discounted_return(r2, g, v2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("discounted_return: rejects bad inputs") {
  CHECK_THROWS_AS(discounted_return({}, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(discounted_return({}, -0.1, 0.0), std::invalid_argument);
  const double bad[] = {std::nan("")};
  CHECK_THROWS_AS(discounted_return(bad, 0.9, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(discounted_return({}, 0.9, INFINITY), std::invalid_argument);
}

TEST_CASE("step: dimension mismatches are usage errors") {
  LineModel model;
  CHECK_THROWS_AS(step(model, State::Zero(2), Action::Zero(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(step(model, State::Zero(1), Action::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("step: clamps actions to bounds") {
  LineModel model;
  const StepResult r = step(model, State::Zero(1), Action::Constant(1, 5.0));
  CHECK(r.next[0] == 1.0);  // clamped to +1
  CHECK(r.reward == 1.0);
}

TEST_CASE("step: non-finite model output raises a model fault") {
  BrokenModel model;
  CHECK_THROWS_AS(step(model, State::Zero(1), Action::Zero(1)), ModelFault);
  try {
    step(model, State::Zero(1), Action::Zero(1));
  } catch (const ModelFault& e) {
    CHECK(std::string(e.what()).find("entry 0") != std::string::npos);
  }
}

TEST_CASE("step: deterministic for identical inputs") {
  LineModel model;
  State s(1);
  s << 0.25;
  Action a(1);
  a << -0.5;
  const StepResult r1 = step(model, s, a);
  const StepResult r2 = step(model, s, a);
  CHECK(r1.next[0] == r2.next[0]);
  CHECK(r1.reward == r2.reward);
}

TEST_CASE("step: gridworld transition (3, right) from the enumerated table") {
  // oracle gridworld: open 5x5 with a uniform -1 step cost
  const GridWorld g = GridWorld::open(5, 5, -1.0, 0.9);
  const TabularMDP m = g.to_tabular();
  // enumerate: state 3 is cell (3,0); moving right lands in cell (4,0) = state 4
  CHECK(m.next_state(3, GridWorld::kRight) == 4);
  CHECK(m.reward_at(3, GridWorld::kRight) == -1.0);
  // EnvModel route agrees
  const StepResult r = step(g, g.state_of(3), Action::Constant(1, 2.0));
  CHECK(g.index_of_state(r.next) == 4);
  CHECK(r.reward == -1.0);
}

TEST_CASE("rollout: trajectory invariants hold") {
  LineModel model;
  RandomStream rng(3);
  std::vector<Action> actions;
  for (int t = 0; t < 6; ++t) {
    actions.push_back(Action::Constant(1, rng.uniform(-1.0, 1.0)));
  }
  State s0(1);
  s0 << 0.1;
  const Trajectory traj = rollout(model, s0, actions);
  REQUIRE(traj.states.size() == 7);
  REQUIRE(traj.actions.size() == 6);
  REQUIRE(traj.rewards.size() == 6);
  for (int t = 0; t < 6; ++t) {
    const StepResult r = step(model, traj.states[t], traj.actions[t]);
    CHECK(traj.states[t + 1][0] == r.next[0]);
    CHECK(traj.rewards[t] == r.reward);
  }
}

TEST_CASE("RandomStream: identical seeds give identical draws") {
  RandomStream a(42), b(42), c(43);
  bool all_equal = true;
  bool any_differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal(), y = b.normal(), z = c.normal();
    all_equal = all_equal && (x == y);
    any_differs = any_differs || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_differs);
}
