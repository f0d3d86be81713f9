#include "critic/critic.hpp"

#include "common/error.hpp"
#include "numerics/ops.hpp"

namespace deflow {

CriticEnsemble CriticEnsemble::create(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act,
                                      double tau, double gamma, Rng& rng) {
  CriticEnsemble c;
  const auto sizes = layer_sizes_for(state_dim + action_dim, hidden, 1);
  for (std::size_t i = 0; i < 2; ++i) {
    c.online[i] = make_mlp(sizes, act, rng);
    c.target[i] = c.online[i];
  }
  c.tau = tau;
  c.gamma = gamma;
  c.check();
  return c;
}

void CriticEnsemble::check() const {
  require(gamma >= 0.0 && gamma < 1.0, "critic: gamma must lie in [0, 1)");
  require(tau > 0.0 && tau <= 1.0, "critic: tau must lie in (0, 1]");
  for (std::size_t i = 0; i < 2; ++i) {
    online[i].check();
    target[i].check();
    if (!same_topology(online[i], target[i]) || !same_topology(online[i], online[0])) {
      fail(ErrorCode::shape_mismatch, "critic: online and target topologies differ");
    }
    require(online[i].output_dim() == 1, "critic: Q heads must have a single output");
  }
}

namespace {

Matrix concat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::shape_mismatch, "critic: state and action batch sizes differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

}  // namespace

Matrix q_values(const Mlp& head, const Matrix& states, const Matrix& actions) {
  return mlp_forward(head, concat(states, actions));
}

QOnTape q_head(const Mlp& head, ParamUse use) {
  return [&head, use](Tape& tape, const Var& s, const Var& a) {
    return mlp_forward(tape, head, ops::concat_cols({s, a}), use);
  };
}

Matrix td_targets(const CriticEnsemble& critic, const Batch& batch, const Matrix& next_actions) {
  if (next_actions.rows() != batch.size()) fail(ErrorCode::shape_mismatch, "td_targets: one next action per transition");
  const Matrix q1 = q_values(critic.target[0], batch.next_states, next_actions);
  const Matrix q2 = q_values(critic.target[1], batch.next_states, next_actions);
  const Matrix not_done = (1.0 - batch.terminals.array()).matrix();
  return batch.rewards + critic.gamma * not_done.cwiseProduct(q1.cwiseMin(q2));
}

Var critic_loss(Tape& tape, const CriticEnsemble& critic, const Matrix& states, const Matrix& actions,
                const Matrix& targets) {
  Var s = tape.constant(states);
  Var a = tape.constant(actions);
  Var y = tape.constant(targets);
  Var l1 = ops::mean(ops::square(ops::sub(q_head(critic.online[0], ParamUse::trainable)(tape, s, a), y)));
  Var l2 = ops::mean(ops::square(ops::sub(q_head(critic.online[1], ParamUse::trainable)(tape, s, a), y)));
  return ops::scale(ops::add(l1, l2), 0.5);
}

CriticOptimizer make_critic_optimizer(const CriticEnsemble& critic, AdamConfig config) {
  return CriticOptimizer{{make_adam(critic.online[0], config), make_adam(critic.online[1], config)}};
}

double critic_update(CriticEnsemble& critic, CriticOptimizer& optim, const Batch& batch, const Matrix& next_actions) {
  const Matrix y = td_targets(critic, batch, next_actions);
  Tape tape;
  Var loss = critic_loss(tape, critic, batch.states, batch.actions, y);
  tape.backward(loss);
  const double value = loss.scalar();
  for (std::size_t i = 0; i < 2; ++i) adam_step(critic.online[i], gradients_for(tape, critic.online[i]), optim.heads[i]);
  for (std::size_t i = 0; i < 2; ++i) polyak_blend(critic.target[i], critic.online[i], critic.tau);
  return value;
}

}  // namespace deflow
