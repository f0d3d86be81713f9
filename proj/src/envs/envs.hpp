#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "data/transition_store.hpp"
#include "numerics/rng.hpp"

namespace deflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

struct EnvStep {
  Vec2 next_state;
  double reward = 0.0;
  bool terminal = false;
};

// ---------------------------------------------------------------------------
// Multimodal bandit: a single-step task whose reward is a sum of Gaussian
// bumps over a 2-D action, with a constant context vector as the state.

struct BanditConfig {
  std::vector<Vec2> mode_centers{{-0.6, 0.0}, {0.6, 0.0}};
  std::vector<double> mode_rewards{1.0, 2.0};
  double reward_bandwidth = 0.25;
  double noise_scale = 0.08;
  Vec2 context{0.0, 0.0};
};

class MultimodalBandit {
 public:
  explicit MultimodalBandit(BanditConfig config);

  const BanditConfig& config() const { return config_; }
  static constexpr int state_dim = 2;
  static constexpr int action_dim = 2;

  /// Σ_i r_i · exp(−‖a − c_i‖² / (2σ_r²)). Throws when the action leaves [−1,1]².
  double reward(Vec2 action) const;
  /// Index of the strictly best mode.
  std::size_t best_mode() const { return best_; }
  std::size_t nearest_mode(Vec2 action) const;
  /// Farther than `radius` from every mode center.
  bool outside_modes(Vec2 action, double radius) const;

 private:
  BanditConfig config_;
  std::size_t best_ = 0;
};

// ---------------------------------------------------------------------------
// Point maze: a point mass in [−1,1]² with a central block, so the start can
// reach the goal through a left or a right corridor.

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct MazeConfig {
  Vec2 start{0.0, -0.75};
  Vec2 goal{0.0, 0.75};
  double goal_radius = 0.1;
  std::vector<Segment> walls = default_walls();
  double dt = 0.1;
  int max_steps = 60;
  double noise_scale = 0.3;
  bool dense_reward = false;

  /// Outline of the box [−0.5, 0.5] × [−0.35, 0.35].
  static std::vector<Segment> default_walls();
};

enum class Corridor { left, right };

class PointMaze {
 public:
  explicit PointMaze(MazeConfig config);

  const MazeConfig& config() const { return config_; }
  static constexpr int state_dim = 2;
  static constexpr int action_dim = 2;

  /// Actions are clamped to [−1,1]²; a move that crosses a wall leaves the
  /// position unchanged. Reward is 1 on entering the goal disc (terminal).
  EnvStep step(Vec2 state, Vec2 action) const;
  bool at_goal(Vec2 position) const;
  bool inside_block(Vec2 position) const;

  /// Waypoints of the scripted follower for a corridor, ending at the goal.
  std::vector<Vec2> waypoints(Corridor corridor) const;

 private:
  MazeConfig config_;
};

bool segments_intersect(const Segment& s, const Segment& t);

// ---------------------------------------------------------------------------

/// Either environment behind one interface, as consumed by the trainer.
class Environment {
 public:
  explicit Environment(MultimodalBandit bandit) : env_(std::move(bandit)) {}
  explicit Environment(PointMaze maze) : env_(std::move(maze)) {}

  bool is_bandit() const { return std::holds_alternative<MultimodalBandit>(env_); }
  const MultimodalBandit& bandit() const { return std::get<MultimodalBandit>(env_); }
  const PointMaze& maze() const { return std::get<PointMaze>(env_); }

  int state_dim() const { return 2; }
  int action_dim() const { return 2; }
  Vec2 initial_state() const;
  /// Episode length cap: 1 for the bandit.
  int horizon() const;
  EnvStep step(Vec2 state, Vec2 action) const;

 private:
  std::variant<MultimodalBandit, PointMaze> env_;
};

// ---------------------------------------------------------------------------
// Scripted behavior data.

/// Uniform mode choice, Gaussian noise of `noise_scale` around the center,
/// clamped to the action box; every transition is terminal.
TransitionStore generate_bandit_dataset(const MultimodalBandit& env, std::size_t n, double noise_scale, Rng& rng);

/// Noisy waypoint followers, corridor chosen uniformly per episode.
/// `corridor_log`, when given, receives the corridor of every transition.
TransitionStore generate_maze_dataset(const PointMaze& env, std::size_t n, double noise_scale, Rng& rng,
                                      std::vector<Corridor>* corridor_log = nullptr);

TransitionStore generate_dataset(const Environment& env, std::size_t n, double noise_scale, Rng& rng);

}  // namespace deflow
