#include "trainer/evaluate.hpp"

#include <cmath>

#include "common/error.hpp"

namespace deflow {

EvalStats evaluate(const Policy& policy, const Environment& env, int episodes, std::uint64_t seed) {
  require(episodes >= 1, "evaluate: episodes must be at least 1");
  const auto n = static_cast<std::size_t>(episodes);
  const Rng root(seed);
  std::vector<Rng> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) streams.push_back(root.split(i));

  EvalStats stats;
  stats.per_episode.assign(n, 0.0);
  stats.first_actions.assign(n, Vec2{});
  stats.used_left.assign(n, false);
  stats.used_right.assign(n, false);

  std::vector<Vec2> state(n, env.initial_state());
  std::vector<bool> done(n, false);
  const int horizon = env.horizon();
  for (int t = 0; t < horizon; ++t) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i]) active.push_back(i);
    }
    if (active.empty()) break;
    const auto rows = static_cast<Eigen::Index>(active.size());
    Matrix states(rows, 2);
    Matrix z(rows, policy.noise_dim());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t i = active[static_cast<std::size_t>(r)];
      states(r, 0) = state[i].x;
      states(r, 1) = state[i].y;
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = streams[i].normal();
    }
    const Matrix actions = policy.act(states, z);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t i = active[static_cast<std::size_t>(r)];
      const Vec2 a{actions(r, 0), actions(r, 1)};
      if (t == 0) stats.first_actions[i] = a;
      const EnvStep step = env.step(state[i], a);
      stats.per_episode[i] += step.reward;
      state[i] = step.next_state;
      if (!env.is_bandit()) {
        if (state[i].x < -0.5) stats.used_left[i] = true;
        if (state[i].x > 0.5) stats.used_right[i] = true;
      }
      if (step.terminal) done[i] = true;
    }
  }

  double sum = 0.0;
  for (double r : stats.per_episode) sum += r;
  stats.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double r : stats.per_episode) sq += (r - stats.mean) * (r - stats.mean);
  stats.std = std::sqrt(sq / static_cast<double>(n));
  return stats;
}

}  // namespace deflow
