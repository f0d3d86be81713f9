#pragma once

#include <cstdint>

#include <json.hpp>

#include "trainer/trainer.hpp"

namespace deflow {

struct LandscapeOptions {
  int grid = 41;      // points per axis over [-1, 1]
  int samples = 200;  // proposal / refined pairs
  std::uint64_t seed = 0;
};

/// Critic Q₁ over an action grid at the environment's initial state, plus
/// sampled (proposal, residual, action) triples from the learner's policy:
/// {"state": [x, y], "grid_x": [...], "grid_y": [...], "q": [[...]] (q[j][i] at
/// (grid_x[i], grid_y[j])), "samples": [{"base", "delta", "action"}...]}.
/// With a baseline learner, its actions for the same noise go to
/// "baseline_samples": [[x, y]...].
nlohmann::json dump_landscape(const Learner& learner, const LandscapeOptions& options,
                              const Learner* baseline = nullptr);

}  // namespace deflow
