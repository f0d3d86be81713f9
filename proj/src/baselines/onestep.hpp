#pragma once

#include "critic/critic.hpp"
#include "flow/flow_policy.hpp"
#include "refinement/refinement.hpp"

namespace deflow {

/// One-step policy π(s, z) on [s ∥ z], distilled from the flow and pushed
/// towards high Q with a fixed behavior-cloning weight.
struct OneStepPolicy {
  Mlp net;
  double alpha_bc = 0.3;

  static OneStepPolicy create(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act,
                              double alpha_bc, Rng& rng);
  int action_dim() const { return net.output_dim(); }
  /// clamp(π(s, z)) without taping.
  Matrix act(const Matrix& states, const Matrix& z) const;
};

struct OneStepForward {
  Var raw;     // π(s, z) before clamping
  Var action;  // clamped
  Matrix flow_target;
};

/// Records π(s, z) and the flow's answer for the same z (a constant).
OneStepForward onestep_forward(Tape& tape, const OneStepPolicy& policy, const FlowPolicy& flow, const Matrix& states,
                               const Matrix& z);

/// mean ‖π(s, z) − euler_sample(flow, s, z)‖² on the unclamped output.
Var distill_loss(const OneStepForward& fwd);
Var distill_loss(Tape& tape, const OneStepPolicy& policy, const FlowPolicy& flow, const Matrix& states, Rng& rng);

/// mean[−Q(s, clamp π(s, z)) / sg(|Q_mean|)] + alpha_bc · distill.
Var onestep_actor_loss(Tape& tape, const OneStepForward& fwd, const QOnTape& q, const Matrix& states, double q_scale,
                       double alpha_bc, Var* q_out = nullptr);

/// Behavior-cloning comparison arm: the flow alone, residual forced to zero.
CompositePolicy bc_only_policy(const FlowPolicy& flow);

}  // namespace deflow
