#include "baselines/onestep.hpp"

#include "common/error.hpp"
#include "numerics/ops.hpp"

namespace deflow {

OneStepPolicy OneStepPolicy::create(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act,
                                    double alpha_bc, Rng& rng) {
  require(alpha_bc > 0.0, "onestep: alpha_bc must be positive");
  return OneStepPolicy{make_mlp(layer_sizes_for(state_dim + action_dim, hidden, action_dim), act, rng), alpha_bc};
}

Matrix OneStepPolicy::act(const Matrix& states, const Matrix& z) const {
  Matrix in(states.rows(), states.cols() + z.cols());
  in.leftCols(states.cols()) = states;
  in.rightCols(z.cols()) = z;
  return mlp_forward(net, in).cwiseMax(-1.0).cwiseMin(1.0);
}

OneStepForward onestep_forward(Tape& tape, const OneStepPolicy& policy, const FlowPolicy& flow, const Matrix& states,
                               const Matrix& z) {
  OneStepForward f;
  f.flow_target = euler_sample(flow, states, z);
  f.raw = mlp_forward(tape, policy.net, ops::concat_cols({tape.constant(states), tape.constant(z)}));
  f.action = ops::clamp(f.raw, -1.0, 1.0);
  return f;
}

Var distill_loss(const OneStepForward& fwd) {
  Tape& tape = *fwd.raw.tape();
  Var err = ops::sub(fwd.raw, tape.constant(fwd.flow_target));
  return ops::mean(ops::row_sum(ops::square(err)));
}

Var distill_loss(Tape& tape, const OneStepPolicy& policy, const FlowPolicy& flow, const Matrix& states, Rng& rng) {
  Matrix z = sample_standard_normal(rng, states.rows(), policy.action_dim());
  return distill_loss(onestep_forward(tape, policy, flow, states, z));
}

Var onestep_actor_loss(Tape& tape, const OneStepForward& fwd, const QOnTape& q, const Matrix& states, double q_scale,
                       double alpha_bc, Var* q_out) {
  require(q_scale > 0.0, "onestep_actor_loss: Q scale must be positive");
  Var qv = q(tape, tape.constant(states), fwd.action);
  if (q_out != nullptr) *q_out = qv;
  Var value_term = ops::mean(ops::scale(qv, -1.0 / q_scale));
  return ops::add(value_term, ops::scale(distill_loss(fwd), alpha_bc));
}

CompositePolicy bc_only_policy(const FlowPolicy& flow) { return CompositePolicy{&flow, nullptr}; }

}  // namespace deflow
