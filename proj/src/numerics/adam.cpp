#include "numerics/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace deflow {

AdamState make_adam(const Mlp& net, AdamConfig config) {
  require(config.lr >= 0.0, "Adam: learning rate must be non-negative");
  AdamState s;
  s.config = config;
  s.first = zero_grads_like(net);
  s.second = zero_grads_like(net);
  return s;
}

namespace {

void update_tensor(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, const AdamConfig& c, double bc1,
                   double bc2) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || m.rows() != param.rows() ||
      m.cols() != param.cols()) {
    fail(ErrorCode::shape_mismatch, "adam_step: gradient/moment shape does not match parameter");
  }
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double lr = c.lr;
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

}  // namespace

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state) {
  if (grads.weights.size() != net.num_layers() || grads.biases.size() != net.num_layers() ||
      state.first.weights.size() != net.num_layers()) {
    fail(ErrorCode::shape_mismatch, "adam_step: layer count mismatch");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.config.beta1, t);
  const double bc2 = 1.0 - std::pow(state.config.beta2, t);
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    update_tensor(net.weights[i], grads.weights[i], state.first.weights[i], state.second.weights[i], state.config,
                  bc1, bc2);
    update_tensor(net.biases[i], grads.biases[i], state.first.biases[i], state.second.biases[i], state.config, bc1,
                  bc2);
  }
}

}  // namespace deflow
