#include "refinement/refinement.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "numerics/ops.hpp"

namespace deflow {

Mlp make_refinement_net(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act, Rng& rng) {
  Mlp net = make_mlp(layer_sizes_for(state_dim + action_dim, hidden, action_dim), act, rng);
  net.weights.back().setZero();
  net.biases.back().setZero();
  return net;
}

void check_refinement_net(const Mlp& net, int state_dim, int action_dim) {
  net.check();
  if (net.input_dim() != state_dim + action_dim || net.output_dim() != action_dim) {
    fail(ErrorCode::shape_mismatch, "refinement net must map state_dim + action_dim inputs to action_dim outputs");
  }
}

namespace {

Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

}  // namespace

ComposedAction compose_action(const CompositePolicy& policy, const Matrix& states, const Matrix& z) {
  require(policy.flow != nullptr, "compose_action: policy has no flow");
  ComposedAction out;
  out.base = euler_sample(*policy.flow, states, z);
  if (policy.refine != nullptr) {
    out.delta = mlp_forward(*policy.refine, concat(states, out.base));
  } else {
    out.delta = Matrix::Zero(out.base.rows(), out.base.cols());
  }
  out.action = (out.base + out.delta).cwiseMax(-1.0).cwiseMin(1.0);
  return out;
}

ComposedAction compose_action(const CompositePolicy& policy, const Matrix& states, Rng& rng) {
  require(policy.flow != nullptr, "compose_action: policy has no flow");
  Matrix z = sample_standard_normal(rng, states.rows(), policy.flow->action_dim());
  return compose_action(policy, states, z);
}

QNormState update_qnorm(const QNormState& state, const Matrix& q_values) {
  require(q_values.size() > 0, "update_qnorm: empty batch");
  const double batch_mean = q_values.cwiseAbs().mean();
  QNormState next = state;
  next.running = state.initialized ? (1.0 - state.rate) * state.running + state.rate * batch_mean : batch_mean;
  next.running = std::max(next.running, state.floor);
  next.initialized = true;
  return next;
}

RefinementForward refinement_forward(Tape& tape, const Mlp& refine, const QOnTape& q, const Matrix& states,
                                     const Matrix& base) {
  return refinement_forward(tape, refine, q, states, tape.constant(base));
}

RefinementForward refinement_forward(Tape& tape, const Mlp& refine, const QOnTape& q, const Matrix& states,
                                     const Var& base) {
  RefinementForward f;
  Var s = tape.constant(states);
  Var a_base = ops::stop_gradient(base);
  f.delta = mlp_forward(tape, refine, ops::concat_cols({s, a_base}));
  f.action = ops::clamp(ops::add(a_base, f.delta), -1.0, 1.0);
  f.q = q(tape, s, f.action);
  f.mean_sq_residual = f.delta.value().rowwise().squaredNorm().mean();
  return f;
}

Var refinement_loss(const RefinementForward& fwd, double q_scale, double alpha) {
  require(q_scale > 0.0, "refinement_loss: Q scale must be positive");
  Var value_term = ops::scale(fwd.q, -1.0 / q_scale);
  Var penalty = ops::scale(ops::row_sum(ops::square(fwd.delta)), alpha);
  return ops::mean(ops::add(value_term, penalty));
}

Var refinement_loss(Tape& tape, const CompositePolicy& policy, const QOnTape& q, const QNormState& qnorm, double alpha,
                    const Matrix& states, Rng& rng, RefinementForward* fwd_out) {
  require(policy.flow != nullptr && policy.refine != nullptr, "refinement_loss: policy needs flow and refine nets");
  require(qnorm.initialized, "refinement_loss: Q normalization is not initialized");
  Matrix z = sample_standard_normal(rng, states.rows(), policy.flow->action_dim());
  const Matrix base = euler_sample(*policy.flow, states, z);
  RefinementForward fwd = refinement_forward(tape, *policy.refine, q, states, base);
  Var loss = refinement_loss(fwd, qnorm.running, alpha);
  if (fwd_out != nullptr) *fwd_out = fwd;
  return loss;
}

}  // namespace deflow
