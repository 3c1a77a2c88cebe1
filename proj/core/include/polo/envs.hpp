#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polo/core.hpp"
#include "polo/oracle.hpp"

namespace polo {

// Axis-aligned wall segment (vertical or horizontal).
struct WallSegment {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool vertical() const { return x1 == x2; }
  bool horizontal() const { return y1 == y2; }
};

struct Extent {
  double xmin = 0, ymin = 0, xmax = 1, ymax = 1;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double span() const { return std::max(width(), height()); }
};

enum class PointMassRewardKind { none, sparse_goal, dense_goal };

struct PointMassReward {
  PointMassRewardKind kind = PointMassRewardKind::none;
  double center_x = 0.5, center_y = 0.5;
  double radius = 0.1;
  double bonus = 1.0;
};

struct PointMassParams {
  double mass = 1.0;
  double dt = 0.02;
  double damping = 0.1;       // per-step velocity decay factor
  double force_scale = 12.5;  // N per unit action
};

// 2D point mass in a walled box. State (x, y, vx, vy), action (fx, fy) in
// [-1, 1]^2. Semi-implicit Euler; collisions stop motion at the wall and
// zero the normal velocity component.
class PointMassWorld final : public EnvModel {
 public:
  PointMassWorld(Extent extent, std::vector<WallSegment> walls,
                 PointMassParams params, PointMassReward reward);

  static PointMassWorld box(PointMassReward reward = {});
  // Four-corridor pinwheel maze in [0,1]^2, corridor width 0.1. The
  // constructor asserts the maze is connected and that reaching at least one
  // corridor end requires going around a wall.
  static PointMassWorld pinwheel_maze(PointMassReward reward = {});
  // {extent, walls, reward_spec, mass, dt, damping, force_scale}; unknown
  // fields rejected.
  static PointMassWorld from_json(const std::string& text);

  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  const Bounds& action_bounds() const override { return action_bounds_; }
  double discount() const override { return 0.99; }
  State initial_state() const override;
  StepResult step(const State& s, const Action& a) const override;
  // value nets see the position only: the value is a spatial field
  Eigen::VectorXd value_features(const State& s) const override;
  Bounds feature_ranges() const override;

  const Extent& extent() const { return extent_; }
  const std::vector<WallSegment>& walls() const { return walls_; }
  const PointMassParams& params() const { return params_; }
  const PointMassReward& reward_spec() const { return reward_; }

  // true if the straight segment a->b strictly crosses some wall
  bool segment_blocked(double ax, double ay, double bx, double by) const;
  // grid flood fill from the start position; true when every free cell is
  // reachable
  bool fully_connected(int resolution = 40) const;

 private:
  double reward_for(double x, double y) const;

  Extent extent_;
  std::vector<WallSegment> walls_;      // user walls only
  std::vector<WallSegment> solids_;     // walls + extent sides
  PointMassParams params_;
  PointMassReward reward_;
  Bounds action_bounds_;
  double backoff_ = 0.0;  // collision resolution offset
};

// Boolean visit grid over an extent; the exploration metric.
class OccupancyGrid {
 public:
  OccupancyGrid(Extent extent, int resolution = 20);

  void add(double x, double y);
  void add_state(const State& s) { add(s[0], s[1]); }
  double coverage() const;
  int resolution() const { return resolution_; }
  int visited_count() const { return visited_count_; }
  void reset();

 private:
  Extent extent_;
  int resolution_;
  std::vector<std::uint8_t> visited_;
  int visited_count_ = 0;
};

// Accumulates the states into the grid and returns the updated coverage.
double coverage_fraction(OccupancyGrid& grid, std::span<const State> states);

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double dt = 0.05;
  double damping = 0.05;
  double torque_max = 2.0;
  bool sparse = true;               // sparse: bonus while upright
  double upright_threshold = 0.3;   // radians from vertical
  double gamma = 0.99;
};

// Torque-limited pendulum, state (theta, theta_dot) with theta in (-pi, pi]
// and theta = 0 upright. Underactuated for torque_max < m g l, so swing-up
// needs energy pumping.
class PendulumWorld final : public EnvModel {
 public:
  explicit PendulumWorld(PendulumParams params = {});

  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  const Bounds& action_bounds() const override { return action_bounds_; }
  double discount() const override { return params_.gamma; }
  State initial_state() const override;  // hanging down, at rest
  StepResult step(const State& s, const Action& a) const override;
  Eigen::VectorXd value_features(const State& s) const override;
  Bounds feature_ranges() const override;

  const PendulumParams& params() const { return params_; }
  bool upright(const State& s) const;

 private:
  PendulumParams params_;
  Bounds action_bounds_;
};

// Deterministic gridworld with moves {left, down, stay, up, right}. As an
// EnvModel the state is the cell coordinate (x, y) and the scalar action in
// [-2, 2] rounds to one of the five moves; to_tabular() exports the exact
// MDP over non-obstacle cells for the oracle machinery.
class GridWorld final : public EnvModel {
 public:
  enum Move { kLeft = 0, kDown = 1, kStay = 2, kUp = 3, kRight = 4 };
  static constexpr int kNumMoves = 5;

  GridWorld(int width, int height, std::vector<std::uint8_t> obstacles,
            std::vector<double> cell_reward, double gamma);

  // open grid with a uniform per-step reward
  static GridWorld open(int width, int height, double step_reward,
                        double gamma);

  int width() const { return width_; }
  int height() const { return height_; }
  bool obstacle(int cx, int cy) const;
  double cell_reward(int cx, int cy) const;
  int num_cells() const { return static_cast<int>(cell_of_index_.size()); }

  // compact non-obstacle cell index (row-major scan), -1 for obstacles
  int index_of(int cx, int cy) const;
  State state_of(int index) const;
  int index_of_state(const State& s) const;

  // (cx, cy) landed on when applying a move from (cx, cy); blocked moves stay
  std::pair<int, int> apply_move(int cx, int cy, Move m) const;

  TabularMDP to_tabular() const;

  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  const Bounds& action_bounds() const override { return action_bounds_; }
  double discount() const override { return gamma_; }
  State initial_state() const override;
  StepResult step(const State& s, const Action& a) const override;
  Bounds feature_ranges() const override;

 private:
  int width_ = 0, height_ = 0;
  std::vector<std::uint8_t> obstacles_;
  std::vector<double> cell_reward_;
  double gamma_ = 0.9;
  Bounds action_bounds_;
  std::vector<int> index_of_cell_;            // -1 for obstacles
  std::vector<std::pair<int, int>> cell_of_index_;
};

}  // namespace polo
