#pragma once

#include <cstdint>

#include "numerics/mlp.hpp"

namespace deflow {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators congruent with one Mlp.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  MlpGrads first;
  MlpGrads second;
};

AdamState make_adam(const Mlp& net, AdamConfig config = {});

/// One bias-corrected Adam update of `net` in place.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state);

}  // namespace deflow
