#pragma once

namespace deflow {

/// Positive multiplier α = exp(log_alpha) holding E‖Δa‖² at the budget delta.
struct LagrangeState {
  double log_alpha = 0.0;
  double delta = 1e-2;
  double lr_alpha = 0.05;
};

LagrangeState make_lagrange(double delta, double lr_alpha, double initial_alpha = 1.0);

double current_alpha(const LagrangeState& state);

/// One SGD step on L(α) = −α·sg(c − δ) in log space:
/// ∂L/∂log α = −α·(c − δ), hence log α ← log α + lr·α·(c − δ).
/// `mean_sq_residual` is the batch mean of ‖Δa‖².
LagrangeState alpha_update(const LagrangeState& state, double mean_sq_residual);

/// Value of L(α) for the given residual statistic.
double alpha_loss(const LagrangeState& state, double mean_sq_residual);

}  // namespace deflow
