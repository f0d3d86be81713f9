#include "flow/flow_policy.hpp"

#include <string>

#include "common/error.hpp"
#include "numerics/ops.hpp"

namespace deflow {

FlowPolicy::FlowPolicy(Mlp field, int state_dim, int action_dim, int steps)
    : field_(std::move(field)), state_dim_(state_dim), action_dim_(action_dim), steps_(steps) {
  require(steps >= 1, "FlowPolicy: steps must be at least 1");
  field_.check();
  if (field_.input_dim() != 1 + state_dim + action_dim || field_.output_dim() != action_dim) {
    fail(ErrorCode::shape_mismatch, "FlowPolicy: field must map 1 + state_dim + action_dim = " +
                                        std::to_string(1 + state_dim + action_dim) + " inputs to action_dim = " +
                                        std::to_string(action_dim) + " outputs");
  }
}

FlowPolicy FlowPolicy::create(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act, int steps,
                              Rng& rng) {
  return FlowPolicy(make_mlp(layer_sizes_for(1 + state_dim + action_dim, hidden, action_dim), act, rng), state_dim,
                    action_dim, steps);
}

namespace {

Matrix field_input(const Matrix& t, const Matrix& s, const Matrix& x) {
  Matrix in(s.rows(), 1 + s.cols() + x.cols());
  in.col(0) = t.col(0);
  in.middleCols(1, s.cols()) = s;
  in.rightCols(x.cols()) = x;
  return in;
}

}  // namespace

Matrix FlowPolicy::velocity(const Matrix& t, const Matrix& s, const Matrix& x) const {
  return mlp_forward(field_, field_input(t, s, x));
}

FieldEval FlowPolicy::as_eval() const {
  return [this](const Matrix& t, const Matrix& s, const Matrix& x) { return velocity(t, s, x); };
}

FieldOnTape FlowPolicy::as_tape_field(ParamUse use) const {
  return [this, use](Tape& tape, const Var& t, const Var& s, const Var& x) {
    return mlp_forward(tape, field_, ops::concat_cols({t, s, x}), use);
  };
}

Var flow_matching_loss(Tape& tape, const FieldOnTape& field, const Matrix& states, const Matrix& actions,
                       const Matrix& x0, const Matrix& t) {
  require(actions.rows() > 0, "flow_matching_loss: empty batch");
  if (x0.rows() != actions.rows() || x0.cols() != actions.cols() || t.rows() != actions.rows() || t.cols() != 1 ||
      states.rows() != actions.rows()) {
    fail(ErrorCode::shape_mismatch, "flow_matching_loss: batch shapes disagree");
  }
  Matrix xt = (1.0 - t.col(0).array()).matrix().asDiagonal() * x0 + t.col(0).asDiagonal() * actions;
  Var target = tape.constant(actions - x0);
  Var v = field(tape, tape.constant(t), tape.constant(states), tape.constant(std::move(xt)));
  Var err = ops::sub(v, target);
  return ops::mean(ops::row_sum(ops::square(err)));
}

Var flow_matching_loss(Tape& tape, const FlowPolicy& policy, const Matrix& states, const Matrix& actions, Rng& rng) {
  const Eigen::Index n = actions.rows();
  Matrix x0 = sample_standard_normal(rng, n, actions.cols());
  Matrix t = sample_uniform(rng, n, 1, 0.0, 1.0);
  return flow_matching_loss(tape, policy.as_tape_field(), states, actions, x0, t);
}

Matrix euler_sample(const FieldEval& field, int steps, const Matrix& states, const Matrix& z) {
  require(steps >= 1, "euler_sample: steps must be at least 1");
  if (z.rows() != states.rows()) fail(ErrorCode::shape_mismatch, "euler_sample: z and states batch sizes differ");
  Matrix x = z;
  Matrix t(states.rows(), 1);
  for (int k = 0; k < steps; ++k) {
    t.setConstant(static_cast<double>(k) / steps);
    Matrix v = field(t, states, x);
    if (v.rows() != x.rows() || v.cols() != x.cols()) fail(ErrorCode::shape_mismatch, "euler_sample: field output shape");
    x += v / static_cast<double>(steps);
  }
  return x.cwiseMax(-1.0).cwiseMin(1.0);
}

Matrix euler_sample(const FlowPolicy& policy, const Matrix& states, const Matrix& z) {
  if (z.cols() != policy.action_dim()) {
    fail(ErrorCode::shape_mismatch, "euler_sample: z has " + std::to_string(z.cols()) + " columns, action_dim is " +
                                        std::to_string(policy.action_dim()));
  }
  return euler_sample(policy.as_eval(), policy.steps(), states, z);
}

Var euler_sample_on_tape(Tape& tape, const FlowPolicy& policy, const Matrix& states, const Matrix& z) {
  const FieldOnTape field = policy.as_tape_field(ParamUse::trainable);
  Var s = tape.constant(states);
  Var x = tape.constant(z);
  for (int k = 0; k < policy.steps(); ++k) {
    Var t = tape.constant(Matrix::Constant(states.rows(), 1, static_cast<double>(k) / policy.steps()));
    x = ops::add(x, ops::scale(field(tape, t, s, x), 1.0 / policy.steps()));
  }
  return ops::clamp(x, -1.0, 1.0);
}

Matrix sample_actions(const FlowPolicy& policy, const Matrix& states, Rng& rng) {
  Matrix z = sample_standard_normal(rng, states.rows(), policy.action_dim());
  return euler_sample(policy, states, z);
}

}  // namespace deflow
