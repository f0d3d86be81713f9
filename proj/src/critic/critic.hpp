#pragma once

#include <array>
#include <functional>

#include "data/transition_store.hpp"
#include "numerics/adam.hpp"
#include "numerics/mlp.hpp"

namespace deflow {

/// Q(s, a) recorded on a tape; returns B×1.
using QOnTape = std::function<Var(Tape&, const Var& states, const Var& actions)>;

/// Twin Q networks on [s ∥ a] with Polyak-averaged target copies.
struct CriticEnsemble {
  std::array<Mlp, 2> online;
  std::array<Mlp, 2> target;
  double tau = 0.005;
  double gamma = 0.99;

  static CriticEnsemble create(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act,
                               double tau, double gamma, Rng& rng);
  void check() const;
};

Matrix q_values(const Mlp& head, const Matrix& states, const Matrix& actions);
/// Tape view of one head. With ParamUse::frozen the head acts as a fixed
/// function: gradients reach the action input but not the head's weights.
QOnTape q_head(const Mlp& head, ParamUse use);

/// y = r + γ·(1 − terminal)·min(Q̄₁(s′, a′), Q̄₂(s′, a′)); a plain matrix, so it
/// can never carry gradient.
Matrix td_targets(const CriticEnsemble& critic, const Batch& batch, const Matrix& next_actions);

/// Mean over the batch and both heads of (Q_i(s, a) − y)².
Var critic_loss(Tape& tape, const CriticEnsemble& critic, const Matrix& states, const Matrix& actions,
                const Matrix& targets);

struct CriticOptimizer {
  std::array<AdamState, 2> heads;
};

CriticOptimizer make_critic_optimizer(const CriticEnsemble& critic, AdamConfig config);

/// One Adam step on critic_loss, then Polyak-blend each target with tau.
/// Returns the loss before the step.
double critic_update(CriticEnsemble& critic, CriticOptimizer& optim, const Batch& batch, const Matrix& next_actions);

}  // namespace deflow
