#include "envs/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "common/error.hpp"

namespace deflow {

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }
Vec2 clamp_box(Vec2 v) { return {clamp1(v.x), clamp1(v.y)}; }
bool in_box(Vec2 v) { return v.x >= -1.0 && v.x <= 1.0 && v.y >= -1.0 && v.y <= 1.0; }

}  // namespace

// --- bandit -----------------------------------------------------------------

MultimodalBandit::MultimodalBandit(BanditConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  require(c.mode_centers.size() >= 2, "bandit: need at least two modes");
  require(c.mode_centers.size() == c.mode_rewards.size(), "bandit: one reward per mode center");
  require(c.reward_bandwidth > 0.0, "bandit: reward_bandwidth must be positive");
  require(c.noise_scale >= 0.0, "bandit: noise_scale must be non-negative");
  for (std::size_t i = 0; i < c.mode_centers.size(); ++i) {
    require(in_box(c.mode_centers[i]), "bandit: mode centers must lie in [-1,1]^2");
    for (std::size_t j = i + 1; j < c.mode_centers.size(); ++j) {
      require(distance(c.mode_centers[i], c.mode_centers[j]) >= 4.0 * c.reward_bandwidth,
              "bandit: mode centers must be at least 4*reward_bandwidth apart");
    }
  }
  best_ = static_cast<std::size_t>(std::max_element(c.mode_rewards.begin(), c.mode_rewards.end()) - c.mode_rewards.begin());
  for (std::size_t i = 0; i < c.mode_rewards.size(); ++i) {
    require(i == best_ || c.mode_rewards[i] < c.mode_rewards[best_], "bandit: the best mode reward must be unique");
  }
}

double MultimodalBandit::reward(Vec2 action) const {
  if (!in_box(action) || !std::isfinite(action.x) || !std::isfinite(action.y)) {
    fail(ErrorCode::invalid_argument, "bandit_reward: action outside [-1,1]^2");
  }
  const double two_var = 2.0 * config_.reward_bandwidth * config_.reward_bandwidth;
  double r = 0.0;
  for (std::size_t i = 0; i < config_.mode_centers.size(); ++i) {
    const double dx = action.x - config_.mode_centers[i].x;
    const double dy = action.y - config_.mode_centers[i].y;
    r += config_.mode_rewards[i] * std::exp(-(dx * dx + dy * dy) / two_var);
  }
  return r;
}

std::size_t MultimodalBandit::nearest_mode(Vec2 action) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < config_.mode_centers.size(); ++i) {
    const double d = distance(action, config_.mode_centers[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

bool MultimodalBandit::outside_modes(Vec2 action, double radius) const {
  return std::all_of(config_.mode_centers.begin(), config_.mode_centers.end(),
                     [&](Vec2 c) { return distance(action, c) > radius; });
}

// --- maze -------------------------------------------------------------------

std::vector<Segment> MazeConfig::default_walls() {
  const Vec2 a{-0.5, -0.35}, b{0.5, -0.35}, c{0.5, 0.35}, d{-0.5, 0.35};
  return {{a, b}, {b, c}, {c, d}, {d, a}};
}

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(Vec2 p, Vec2 q, Vec2 r) {
  return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) && std::min(p.y, r.y) <= q.y &&
         q.y <= std::max(p.y, r.y);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

bool segments_intersect(const Segment& s, const Segment& t) {
  const int d1 = sign(cross(t.a, t.b, s.a));
  const int d2 = sign(cross(t.a, t.b, s.b));
  const int d3 = sign(cross(s.a, s.b, t.a));
  const int d4 = sign(cross(s.a, s.b, t.b));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  if (d1 == 0 && on_segment(t.a, s.a, t.b)) return true;
  if (d2 == 0 && on_segment(t.a, s.b, t.b)) return true;
  if (d3 == 0 && on_segment(s.a, t.a, s.b)) return true;
  if (d4 == 0 && on_segment(s.a, t.b, s.b)) return true;
  return false;
}

PointMaze::PointMaze(MazeConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  require(c.dt > 0.0, "maze: dt must be positive");
  require(c.max_steps >= 0, "maze: max_steps must be non-negative");
  require(c.goal_radius > 0.0, "maze: goal_radius must be positive");
  require(c.noise_scale >= 0.0, "maze: noise_scale must be non-negative");
  require(in_box(c.start) && in_box(c.goal), "maze: start and goal must lie in [-1,1]^2");
  require(!inside_block(c.start) && !inside_block(c.goal), "maze: start and goal must not be inside walls");
}

bool PointMaze::inside_block(Vec2 p) const {
  // Crossing parity of a ray towards +x against the wall outline.
  int crossings = 0;
  const Segment ray{p, {p.x + 10.0, p.y + 1e-9}};
  for (const Segment& w : config_.walls) crossings += segments_intersect(ray, w) ? 1 : 0;
  return crossings % 2 == 1;
}

bool PointMaze::at_goal(Vec2 p) const { return distance(p, config_.goal) <= config_.goal_radius; }

EnvStep PointMaze::step(Vec2 state, Vec2 action) const {
  const Vec2 a = clamp_box(action);
  const Vec2 proposed = clamp_box({state.x + config_.dt * a.x, state.y + config_.dt * a.y});
  Vec2 next = proposed;
  const Segment motion{state, proposed};
  for (const Segment& w : config_.walls) {
    if (segments_intersect(motion, w)) {
      next = state;
      break;
    }
  }
  EnvStep out;
  out.next_state = next;
  out.terminal = at_goal(next);
  if (out.terminal) {
    out.reward = 1.0;
  } else {
    out.reward = config_.dense_reward ? -distance(next, config_.goal) : 0.0;
  }
  return out;
}

std::vector<Vec2> PointMaze::waypoints(Corridor corridor) const {
  const double side = corridor == Corridor::left ? -1.0 : 1.0;
  return {{0.75 * side, -0.6}, {0.75 * side, 0.6}, config_.goal};
}

// --- environment ------------------------------------------------------------

Vec2 Environment::initial_state() const {
  return is_bandit() ? bandit().config().context : maze().config().start;
}

int Environment::horizon() const { return is_bandit() ? 1 : maze().config().max_steps; }

EnvStep Environment::step(Vec2 state, Vec2 action) const {
  if (is_bandit()) {
    EnvStep s;
    s.next_state = bandit().config().context;
    s.reward = bandit().reward(clamp_box(action));
    s.terminal = true;
    return s;
  }
  return maze().step(state, action);
}

// --- datasets ---------------------------------------------------------------

namespace {

Transition make_transition(Vec2 s, Vec2 a, const EnvStep& step) {
  return Transition{{s.x, s.y}, {a.x, a.y}, step.reward, {step.next_state.x, step.next_state.y}, step.terminal};
}

}  // namespace

TransitionStore generate_bandit_dataset(const MultimodalBandit& env, std::size_t n, double noise_scale, Rng& rng) {
  require(n > 0, "n must be positive");
  TransitionStore store(2, 2);
  const auto& c = env.config();
  const Vec2 s = c.context;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 center = c.mode_centers[rng.below(c.mode_centers.size())];
    const double nx = rng.normal();
    const double ny = rng.normal();
    const Vec2 a = clamp_box({center.x + noise_scale * nx, center.y + noise_scale * ny});
    EnvStep step{s, env.reward(a), true};
    store.push(make_transition(s, a, step));
  }
  return store;
}

TransitionStore generate_maze_dataset(const PointMaze& env, std::size_t n, double noise_scale, Rng& rng,
                                      std::vector<Corridor>* corridor_log) {
  require(n > 0, "n must be positive");
  TransitionStore store(2, 2);
  const auto& c = env.config();
  while (store.size() < n) {
    const Corridor corridor = rng.below(2) == 0 ? Corridor::left : Corridor::right;
    const std::vector<Vec2> path = env.waypoints(corridor);
    std::size_t target = 0;
    Vec2 s = c.start;
    for (int t = 0; t < c.max_steps && store.size() < n; ++t) {
      while (target + 1 < path.size() && distance(s, path[target]) < 0.1) ++target;
      const double dx = path[target].x - s.x;
      const double dy = path[target].y - s.y;
      const double norm = std::max(std::hypot(dx, dy), 1e-12);
      const double nx = rng.normal();
      const double ny = rng.normal();
      const Vec2 a = clamp_box({dx / norm + noise_scale * nx, dy / norm + noise_scale * ny});
      const EnvStep step = env.step(s, a);
      store.push(make_transition(s, a, step));
      if (corridor_log != nullptr) corridor_log->push_back(corridor);
      s = step.next_state;
      if (step.terminal) break;
    }
  }
  return store;
}

TransitionStore generate_dataset(const Environment& env, std::size_t n, double noise_scale, Rng& rng) {
  return env.is_bandit() ? generate_bandit_dataset(env.bandit(), n, noise_scale, rng)
                         : generate_maze_dataset(env.maze(), n, noise_scale, rng);
}

}  // namespace deflow
