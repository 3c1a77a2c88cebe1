#include "polo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace polo {

using nlohmann::json;

namespace {

// Earliest hit of the motion p -> p + disp against an axis-aligned segment.
// Returns the hit time in [0, 1], or a negative value when there is none.
// `axis` is the blocked coordinate (0 = x for vertical walls).
double hit_time(double p_n, double d_n, double wall_c, double p_t, double d_t,
                double span_lo, double span_hi) {
  const double side = p_n - wall_c;
  double t;
  if (side == 0.0) {
    // starting exactly on the wall plane: any normal motion is blocked
    if (d_n == 0.0) return -1.0;
    t = 0.0;
  } else {
    // must be moving toward the plane
    if (side * d_n >= 0.0) return -1.0;
    t = -side / d_n;
    if (t > 1.0) return -1.0;
  }
  const double tangent = p_t + t * d_t;
  if (tangent < span_lo || tangent > span_hi) return -1.0;
  return t;
}

}  // namespace

PointMassWorld::PointMassWorld(Extent extent, std::vector<WallSegment> walls,
                               PointMassParams params, PointMassReward reward)
    : extent_(extent), walls_(std::move(walls)), params_(params),
      reward_(reward) {
  for (const WallSegment& w : walls_) {
    if (!w.vertical() && !w.horizontal()) {
      throw std::invalid_argument("PointMassWorld: walls must be axis-aligned");
    }
  }
  solids_ = walls_;
  solids_.push_back({extent_.xmin, extent_.ymin, extent_.xmin, extent_.ymax});
  solids_.push_back({extent_.xmax, extent_.ymin, extent_.xmax, extent_.ymax});
  solids_.push_back({extent_.xmin, extent_.ymin, extent_.xmax, extent_.ymin});
  solids_.push_back({extent_.xmin, extent_.ymax, extent_.xmax, extent_.ymax});
  action_bounds_ = Bounds::symmetric(2, 1.0);
  backoff_ = 1e-12 * extent_.span();
}

State PointMassWorld::initial_state() const {
  State s(4);
  s << 0.5 * (extent_.xmin + extent_.xmax), 0.5 * (extent_.ymin + extent_.ymax),
      0.0, 0.0;
  return s;
}

double PointMassWorld::reward_for(double x, double y) const {
  switch (reward_.kind) {
    case PointMassRewardKind::none:
      return 0.0;
    case PointMassRewardKind::sparse_goal: {
      const double dx = x - reward_.center_x;
      const double dy = y - reward_.center_y;
      return dx * dx + dy * dy <= reward_.radius * reward_.radius
                 ? reward_.bonus
                 : 0.0;
    }
    case PointMassRewardKind::dense_goal: {
      const double dx = x - reward_.center_x;
      const double dy = y - reward_.center_y;
      return -(dx * dx + dy * dy);
    }
  }
  return 0.0;
}

StepResult PointMassWorld::step(const State& s, const Action& a) const {
  double x = s[0], y = s[1];
  double vx = s[2], vy = s[3];

  const double gain = params_.force_scale / params_.mass;
  vx = (1.0 - params_.damping) * vx + params_.dt * gain * a[0];
  vy = (1.0 - params_.damping) * vy + params_.dt * gain * a[1];

  double dx = params_.dt * vx;
  double dy = params_.dt * vy;

  // Sweep the motion against all solid segments, consuming the displacement
  // pass by pass; each hit zeroes the normal displacement and velocity.
  for (int pass = 0; pass < 4 && (dx != 0.0 || dy != 0.0); ++pass) {
    double t_best = std::numeric_limits<double>::infinity();
    int hit_axis = -1;
    double hit_coord = 0.0;
    for (const WallSegment& w : solids_) {
      if (w.vertical()) {
        const double t = hit_time(x, dx, w.x1, y, dy, std::min(w.y1, w.y2),
                                  std::max(w.y1, w.y2));
        if (t >= 0.0 && t < t_best) {
          t_best = t;
          hit_axis = 0;
          hit_coord = w.x1;
        }
      } else {
        const double t = hit_time(y, dy, w.y1, x, dx, std::min(w.x1, w.x2),
                                  std::max(w.x1, w.x2));
        if (t >= 0.0 && t < t_best) {
          t_best = t;
          hit_axis = 1;
          hit_coord = w.y1;
        }
      }
    }
    if (hit_axis < 0) {
      x += dx;
      y += dy;
      break;
    }
    x += t_best * dx;
    y += t_best * dy;
    const double remain = 1.0 - t_best;
    if (hit_axis == 0) {
      x = hit_coord - (dx > 0.0 ? backoff_ : -backoff_);
      dx = 0.0;
      vx = 0.0;
      dy *= remain;
    } else {
      y = hit_coord - (dy > 0.0 ? backoff_ : -backoff_);
      dy = 0.0;
      vy = 0.0;
      dx *= remain;
    }
  }

  x = std::clamp(x, extent_.xmin, extent_.xmax);
  y = std::clamp(y, extent_.ymin, extent_.ymax);

  StepResult out;
  out.next.resize(4);
  out.next << x, y, vx, vy;
  out.reward = reward_for(x, y);
  return out;
}

Eigen::VectorXd PointMassWorld::value_features(const State& s) const {
  return s.head(2);
}

Bounds PointMassWorld::feature_ranges() const {
  Bounds b;
  b.lo.resize(2);
  b.hi.resize(2);
  b.lo << extent_.xmin, extent_.ymin;
  b.hi << extent_.xmax, extent_.ymax;
  return b;
}

bool PointMassWorld::segment_blocked(double ax, double ay, double bx,
                                     double by) const {
  const double dx = bx - ax, dy = by - ay;
  for (const WallSegment& w : walls_) {
    if (w.vertical()) {
      const double s0 = ax - w.x1, s1 = bx - w.x1;
      if ((s0 > 0.0 && s1 < 0.0) || (s0 < 0.0 && s1 > 0.0)) {
        const double t = -s0 / dx;
        const double yc = ay + t * dy;
        if (yc >= std::min(w.y1, w.y2) && yc <= std::max(w.y1, w.y2)) {
          return true;
        }
      }
    } else {
      const double s0 = ay - w.y1, s1 = by - w.y1;
      if ((s0 > 0.0 && s1 < 0.0) || (s0 < 0.0 && s1 > 0.0)) {
        const double t = -s0 / dy;
        const double xc = ax + t * dx;
        if (xc >= std::min(w.x1, w.x2) && xc <= std::max(w.x1, w.x2)) {
          return true;
        }
      }
    }
  }
  return false;
}

bool PointMassWorld::fully_connected(int resolution) const {
  const int n = resolution;
  const double cw = extent_.width() / n;
  const double ch = extent_.height() / n;
  auto cx = [&](int i) { return extent_.xmin + (i + 0.5) * cw; };
  auto cy = [&](int j) { return extent_.ymin + (j + 0.5) * ch; };

  const State s0 = initial_state();
  const int si = std::clamp(static_cast<int>((s0[0] - extent_.xmin) / cw), 0, n - 1);
  const int sj = std::clamp(static_cast<int>((s0[1] - extent_.ymin) / ch), 0, n - 1);

  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n) * n, 0);
  std::vector<std::pair<int, int>> stack{{si, sj}};
  seen[sj * n + si] = 1;
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k], nj = j + dj[k];
      if (ni < 0 || ni >= n || nj < 0 || nj >= n) continue;
      if (seen[nj * n + ni]) continue;
      if (segment_blocked(cx(i), cy(j), cx(ni), cy(nj))) continue;
      seen[nj * n + ni] = 1;
      stack.emplace_back(ni, nj);
    }
  }
  for (std::uint8_t v : seen) {
    if (!v) return false;
  }
  return true;
}

PointMassWorld PointMassWorld::box(PointMassReward reward) {
  return PointMassWorld({0.0, 0.0, 1.0, 1.0}, {}, {}, reward);
}

PointMassWorld PointMassWorld::pinwheel_maze(PointMassReward reward) {
  // Two swirl layers, four arms, corridor width 0.1. Each arm leaves the
  // central hub, turns at the inner baffle, and dead-ends in a corner pocket.
  std::vector<WallSegment> walls = {
      {0.45, 0.55, 0.45, 1.00},  // inner layer
      {0.55, 0.55, 1.00, 0.55},
      {0.55, 0.00, 0.55, 0.45},
      {0.00, 0.45, 0.45, 0.45},
      {0.35, 0.45, 0.35, 0.90},  // outer layer
      {0.45, 0.65, 0.90, 0.65},
      {0.65, 0.10, 0.65, 0.55},
      {0.10, 0.35, 0.55, 0.35},
  };
  PointMassWorld world({0.0, 0.0, 1.0, 1.0}, std::move(walls), {}, reward);
  if (!world.fully_connected()) {
    throw std::logic_error("pinwheel maze: free space is not connected");
  }
  // at least one corridor end must be unreachable in a straight line
  const bool needs_lookahead =
      world.segment_blocked(0.5, 0.5, 0.05, 0.95) ||
      world.segment_blocked(0.5, 0.5, 0.95, 0.95) ||
      world.segment_blocked(0.5, 0.5, 0.95, 0.05) ||
      world.segment_blocked(0.5, 0.5, 0.05, 0.05);
  if (!needs_lookahead) {
    throw std::logic_error("pinwheel maze: no corridor requires lookahead");
  }
  return world;
}

namespace {

void require_fields(const json& j, std::initializer_list<const char*> required,
                    std::initializer_list<const char*> optional,
                    const std::string& where) {
  for (const char* f : required) {
    if (!j.contains(f)) {
      throw std::invalid_argument(where + ": missing field '" + f + "'");
    }
  }
  for (const auto& [key, _] : j.items()) {
    const bool known =
        std::any_of(required.begin(), required.end(),
                    [&](const char* f) { return key == f; }) ||
        std::any_of(optional.begin(), optional.end(),
                    [&](const char* f) { return key == f; });
    if (!known) {
      throw std::invalid_argument(where + ": unknown field '" + key + "'");
    }
  }
}

PointMassReward reward_from_json(const json& j) {
  PointMassReward r;
  const std::string type = j.at("type").get<std::string>();
  if (type == "none") {
    require_fields(j, {"type"}, {}, "reward_spec");
    r.kind = PointMassRewardKind::none;
  } else if (type == "sparse-goal") {
    require_fields(j, {"type", "center", "radius", "bonus"}, {}, "reward_spec");
    r.kind = PointMassRewardKind::sparse_goal;
    r.center_x = j.at("center").at(0).get<double>();
    r.center_y = j.at("center").at(1).get<double>();
    r.radius = j.at("radius").get<double>();
    r.bonus = j.at("bonus").get<double>();
  } else if (type == "dense-goal") {
    require_fields(j, {"type", "center"}, {}, "reward_spec");
    r.kind = PointMassRewardKind::dense_goal;
    r.center_x = j.at("center").at(0).get<double>();
    r.center_y = j.at("center").at(1).get<double>();
  } else {
    throw std::invalid_argument("reward_spec: unknown type '" + type + "'");
  }
  return r;
}

}  // namespace

PointMassWorld PointMassWorld::from_json(const std::string& text) {
  json j = json::parse(text);
  require_fields(j, {"extent", "walls", "reward_spec"},
                 {"mass", "dt", "damping", "force_scale"}, "world");
  if (!j["extent"].is_array() || j["extent"].size() != 4) {
    throw std::invalid_argument("world: extent must be [xmin, ymin, xmax, ymax]");
  }
  Extent e{j["extent"][0].get<double>(), j["extent"][1].get<double>(),
           j["extent"][2].get<double>(), j["extent"][3].get<double>()};
  std::vector<WallSegment> walls;
  for (const json& w : j["walls"]) {
    if (!w.is_array() || w.size() != 4) {
      throw std::invalid_argument("world: wall entries must be [x1,y1,x2,y2]");
    }
    walls.push_back({w[0].get<double>(), w[1].get<double>(),
                     w[2].get<double>(), w[3].get<double>()});
  }
  PointMassParams p;
  if (j.contains("mass")) p.mass = j["mass"].get<double>();
  if (j.contains("dt")) p.dt = j["dt"].get<double>();
  if (j.contains("damping")) p.damping = j["damping"].get<double>();
  if (j.contains("force_scale")) p.force_scale = j["force_scale"].get<double>();
  return PointMassWorld(e, std::move(walls), p, reward_from_json(j["reward_spec"]));
}

// ---------------------------------------------------------------------------

OccupancyGrid::OccupancyGrid(Extent extent, int resolution)
    : extent_(extent), resolution_(resolution),
      visited_(static_cast<std::size_t>(resolution) * resolution, 0) {
  if (resolution <= 0) {
    throw std::invalid_argument("OccupancyGrid: resolution must be positive");
  }
}

void OccupancyGrid::add(double x, double y) {
  const int i = std::clamp(
      static_cast<int>((x - extent_.xmin) / extent_.width() * resolution_), 0,
      resolution_ - 1);
  const int j = std::clamp(
      static_cast<int>((y - extent_.ymin) / extent_.height() * resolution_), 0,
      resolution_ - 1);
  std::uint8_t& cell = visited_[static_cast<std::size_t>(j) * resolution_ + i];
  if (!cell) {
    cell = 1;
    ++visited_count_;
  }
}

double OccupancyGrid::coverage() const {
  return static_cast<double>(visited_count_) /
         static_cast<double>(visited_.size());
}

void OccupancyGrid::reset() {
  std::fill(visited_.begin(), visited_.end(), 0);
  visited_count_ = 0;
}

double coverage_fraction(OccupancyGrid& grid, std::span<const State> states) {
  for (const State& s : states) grid.add_state(s);
  return grid.coverage();
}

// ---------------------------------------------------------------------------

PendulumWorld::PendulumWorld(PendulumParams params) : params_(params) {
  action_bounds_ = Bounds::symmetric(1, params_.torque_max);
}

State PendulumWorld::initial_state() const {
  State s(2);
  s << M_PI, 0.0;
  return s;
}

StepResult PendulumWorld::step(const State& s, const Action& a) const {
  const double theta = s[0];
  const double omega = s[1];
  const double inertia = params_.mass * params_.length * params_.length;
  const double accel = params_.gravity / params_.length * std::sin(theta) -
                       params_.damping * omega + a[0] / inertia;
  const double omega_next = omega + params_.dt * accel;
  double theta_next = theta + params_.dt * omega_next;
  // wrap to (-pi, pi]
  theta_next = std::remainder(theta_next, 2.0 * M_PI);
  if (theta_next <= -M_PI) theta_next += 2.0 * M_PI;

  StepResult out;
  out.next.resize(2);
  out.next << theta_next, omega_next;
  if (params_.sparse) {
    out.reward = std::abs(theta_next) <= params_.upright_threshold ? 1.0 : 0.0;
  } else {
    out.reward = -(theta_next * theta_next + 0.1 * omega_next * omega_next);
  }
  return out;
}

bool PendulumWorld::upright(const State& s) const {
  return std::abs(s[0]) <= params_.upright_threshold;
}

Eigen::VectorXd PendulumWorld::value_features(const State& s) const {
  Eigen::VectorXd f(3);
  f << std::cos(s[0]), std::sin(s[0]), s[1];
  return f;
}

Bounds PendulumWorld::feature_ranges() const {
  Bounds b;
  b.lo.resize(3);
  b.hi.resize(3);
  b.lo << -1.0, -1.0, -10.0;
  b.hi << 1.0, 1.0, 10.0;
  return b;
}

// ---------------------------------------------------------------------------

GridWorld::GridWorld(int width, int height, std::vector<std::uint8_t> obstacles,
                     std::vector<double> cell_reward, double gamma)
    : width_(width), height_(height), obstacles_(std::move(obstacles)),
      cell_reward_(std::move(cell_reward)), gamma_(gamma) {
  if (width_ <= 0 || height_ <= 0) {
    throw std::invalid_argument("GridWorld: empty grid");
  }
  const std::size_t n = static_cast<std::size_t>(width_) * height_;
  if (obstacles_.size() != n || cell_reward_.size() != n) {
    throw std::invalid_argument("GridWorld: mask/reward size mismatch");
  }
  index_of_cell_.assign(n, -1);
  for (int cy = 0; cy < height_; ++cy) {
    for (int cx = 0; cx < width_; ++cx) {
      if (!obstacles_[cy * width_ + cx]) {
        index_of_cell_[cy * width_ + cx] =
            static_cast<int>(cell_of_index_.size());
        cell_of_index_.emplace_back(cx, cy);
      }
    }
  }
  if (cell_of_index_.empty()) {
    throw std::invalid_argument("GridWorld: every cell is an obstacle");
  }
  action_bounds_ = Bounds::symmetric(1, 2.0);
}

GridWorld GridWorld::open(int width, int height, double step_reward,
                          double gamma) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  return GridWorld(width, height, std::vector<std::uint8_t>(n, 0),
                   std::vector<double>(n, step_reward), gamma);
}

bool GridWorld::obstacle(int cx, int cy) const {
  if (cx < 0 || cx >= width_ || cy < 0 || cy >= height_) return true;
  return obstacles_[cy * width_ + cx] != 0;
}

double GridWorld::cell_reward(int cx, int cy) const {
  return cell_reward_[cy * width_ + cx];
}

int GridWorld::index_of(int cx, int cy) const {
  if (cx < 0 || cx >= width_ || cy < 0 || cy >= height_) return -1;
  return index_of_cell_[cy * width_ + cx];
}

State GridWorld::state_of(int index) const {
  const auto& [cx, cy] = cell_of_index_.at(index);
  State s(2);
  s << static_cast<double>(cx), static_cast<double>(cy);
  return s;
}

int GridWorld::index_of_state(const State& s) const {
  const int cx = static_cast<int>(std::lround(s[0]));
  const int cy = static_cast<int>(std::lround(s[1]));
  const int idx = index_of(cx, cy);
  if (idx < 0) {
    throw std::invalid_argument("GridWorld: state is not a free cell");
  }
  return idx;
}

std::pair<int, int> GridWorld::apply_move(int cx, int cy, Move m) const {
  int nx = cx, ny = cy;
  switch (m) {
    case kLeft: nx -= 1; break;
    case kDown: ny -= 1; break;
    case kStay: break;
    case kUp: ny += 1; break;
    case kRight: nx += 1; break;
  }
  if (obstacle(nx, ny)) return {cx, cy};
  return {nx, ny};
}

TabularMDP GridWorld::to_tabular() const {
  TabularMDP m;
  m.num_states = num_cells();
  m.num_actions = kNumMoves;
  m.gamma = gamma_;
  m.next.resize(static_cast<std::size_t>(m.num_states) * kNumMoves);
  m.reward.resize(m.next.size());
  for (int idx = 0; idx < m.num_states; ++idx) {
    const auto& [cx, cy] = cell_of_index_[idx];
    for (int a = 0; a < kNumMoves; ++a) {
      const auto [nx, ny] = apply_move(cx, cy, static_cast<Move>(a));
      m.next[idx * kNumMoves + a] = index_of(nx, ny);
      m.reward[idx * kNumMoves + a] = cell_reward(nx, ny);
    }
  }
  m.validate();
  return m;
}

State GridWorld::initial_state() const { return state_of(0); }

StepResult GridWorld::step(const State& s, const Action& a) const {
  const int cx = static_cast<int>(std::lround(s[0]));
  const int cy = static_cast<int>(std::lround(s[1]));
  const long k = std::clamp(std::lround(a[0]), -2L, 2L);
  const Move m = static_cast<Move>(static_cast<int>(k) + 2);
  const auto [nx, ny] = apply_move(cx, cy, m);
  StepResult out;
  out.next.resize(2);
  out.next << static_cast<double>(nx), static_cast<double>(ny);
  out.reward = cell_reward(nx, ny);
  return out;
}

Bounds GridWorld::feature_ranges() const {
  Bounds b;
  b.lo.resize(2);
  b.hi.resize(2);
  b.lo << 0.0, 0.0;
  b.hi << static_cast<double>(width_ - 1), static_cast<double>(height_ - 1);
  return b;
}

}  // namespace polo
