#include "lagrange/lagrange.hpp"

#include <cmath>

#include "common/error.hpp"

namespace deflow {

LagrangeState make_lagrange(double delta, double lr_alpha, double initial_alpha) {
  require(delta > 0.0, "lagrange: delta must be positive");
  require(lr_alpha > 0.0, "lagrange: lr_alpha must be positive");
  require(initial_alpha > 0.0, "lagrange: initial alpha must be positive");
  return LagrangeState{std::log(initial_alpha), delta, lr_alpha};
}

double current_alpha(const LagrangeState& state) { return std::exp(state.log_alpha); }

double alpha_loss(const LagrangeState& state, double mean_sq_residual) {
  return -current_alpha(state) * (mean_sq_residual - state.delta);
}

LagrangeState alpha_update(const LagrangeState& state, double mean_sq_residual) {
  require(mean_sq_residual >= 0.0, "alpha_update: mean squared residual must be non-negative");
  if (!std::isfinite(mean_sq_residual)) fail(ErrorCode::numeric, "alpha_update: non-finite residual statistic");
  LagrangeState next = state;
  const double grad = -current_alpha(state) * (mean_sq_residual - state.delta);
  next.log_alpha = state.log_alpha - state.lr_alpha * grad;
  if (!std::isfinite(next.log_alpha)) fail(ErrorCode::numeric, "alpha_update: log_alpha diverged");
  return next;
}

}  // namespace deflow
