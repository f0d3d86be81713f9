#pragma once

#include <functional>

#include "numerics/mlp.hpp"
#include "numerics/rng.hpp"
#include "numerics/tape.hpp"

namespace deflow {

/// Velocity v(t, s, x) evaluated on a batch; t is B×1.
using FieldEval = std::function<Matrix(const Matrix& t, const Matrix& s, const Matrix& x)>;
/// The same field recorded on a tape.
using FieldOnTape = std::function<Var(Tape&, const Var& t, const Var& s, const Var& x)>;

/// Multi-step flow-matching behavior policy. The vector field is an Mlp on the
/// concatenated input [t ∥ s ∥ x] with action_dim outputs.
class FlowPolicy {
 public:
  FlowPolicy(Mlp field, int state_dim, int action_dim, int steps);
  static FlowPolicy create(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act, int steps,
                           Rng& rng);

  const Mlp& field() const { return field_; }
  Mlp& field() { return field_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int steps() const { return steps_; }

  Matrix velocity(const Matrix& t, const Matrix& s, const Matrix& x) const;
  FieldEval as_eval() const;
  FieldOnTape as_tape_field(ParamUse use = ParamUse::trainable) const;

 private:
  Mlp field_;
  int state_dim_;
  int action_dim_;
  int steps_;
};

/// Mean over the batch of ‖v(t, s, x_t) − (a − x0)‖² with x_t = (1−t)·x0 + t·a,
/// for explicitly supplied x0 (B×A) and t (B×1).
Var flow_matching_loss(Tape& tape, const FieldOnTape& field, const Matrix& states, const Matrix& actions,
                       const Matrix& x0, const Matrix& t);
/// Draws x0 ~ N(0, I) and t ~ U[0, 1] per sample from `rng`.
Var flow_matching_loss(Tape& tape, const FlowPolicy& policy, const Matrix& states, const Matrix& actions, Rng& rng);

/// M-step forward Euler from z at t = 0 to t = 1, then clamp to [−1, 1].
Matrix euler_sample(const FieldEval& field, int steps, const Matrix& states, const Matrix& z);
Matrix euler_sample(const FlowPolicy& policy, const Matrix& states, const Matrix& z);

/// Euler rollout recorded on the tape (differentiable in the field's
/// parameters); used to verify that downstream stop-gradients cut it off.
Var euler_sample_on_tape(Tape& tape, const FlowPolicy& policy, const Matrix& states, const Matrix& z);

/// Fresh z ~ N(0, I) per state, then euler_sample. Nothing is taped.
Matrix sample_actions(const FlowPolicy& policy, const Matrix& states, Rng& rng);

}  // namespace deflow
