#pragma once

#include "critic/critic.hpp"
#include "flow/flow_policy.hpp"
#include "numerics/mlp.hpp"

namespace deflow {

/// Residual network f(s, a_base) on [s ∥ a_base] → Δa. The output layer starts
/// at zero, so a fresh composite policy reproduces the flow exactly.
Mlp make_refinement_net(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act, Rng& rng);
void check_refinement_net(const Mlp& net, int state_dim, int action_dim);

/// Flow proposal plus (optional) instance-conditioned residual. A null refine
/// net means Δa ≡ 0, i.e. plain behavior cloning.
struct CompositePolicy {
  const FlowPolicy* flow = nullptr;
  const Mlp* refine = nullptr;
};

struct ComposedAction {
  Matrix base;
  Matrix delta;
  Matrix action;
};

/// a_base = euler_sample(flow, s, z); Δa = f(s, a_base); a = clamp(a_base + Δa).
ComposedAction compose_action(const CompositePolicy& policy, const Matrix& states, const Matrix& z);
ComposedAction compose_action(const CompositePolicy& policy, const Matrix& states, Rng& rng);

/// Running |Q| scale: exponential average (rate 0.01) of per-batch mean |Q|,
/// initialized by the first batch and floored at 1e-6.
struct QNormState {
  double running = 1.0;
  bool initialized = false;
  double rate = 0.01;
  double floor = 1e-6;
};

QNormState update_qnorm(const QNormState& state, const Matrix& q_values);

/// Taped pieces of the refinement objective for a fixed batch of proposals.
struct RefinementForward {
  Var delta;   // pre-clamp residual
  Var action;  // clamp(a_base + Δa)
  Var q;       // Q(s, action), B×1
  double mean_sq_residual = 0.0;
};

/// Records Δa and Q(s, clamp(a_base + Δa)). The proposal enters the tape as a
/// constant, so nothing upstream of it (the flow) can receive gradient.
RefinementForward refinement_forward(Tape& tape, const Mlp& refine, const QOnTape& q, const Matrix& states,
                                     const Matrix& base);
/// Same, for a proposal already recorded on the tape (e.g. a taped Euler
/// rollout); it passes through stop_gradient before use.
RefinementForward refinement_forward(Tape& tape, const Mlp& refine, const QOnTape& q, const Matrix& states,
                                     const Var& base);

/// mean[−Q / sg(|Q_mean|) + α·‖Δa‖²]; α and the Q scale are constants.
Var refinement_loss(const RefinementForward& fwd, double q_scale, double alpha);

/// Convenience: draw proposals from the flow with `rng`, then forward + loss.
Var refinement_loss(Tape& tape, const CompositePolicy& policy, const QOnTape& q, const QNormState& qnorm, double alpha,
                    const Matrix& states, Rng& rng, RefinementForward* fwd_out = nullptr);

}  // namespace deflow
