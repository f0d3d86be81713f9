#include "numerics/mlp.hpp"

#include <cmath>
#include <cstring>

#include "common/error.hpp"
#include "numerics/ops.hpp"

namespace deflow {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  fail(ErrorCode::invalid_argument, "unknown activation '" + name + "' (expected relu or tanh)");
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    n += static_cast<std::size_t>(layer_sizes[i] + 1) * static_cast<std::size_t>(layer_sizes[i + 1]);
  }
  return n;
}

void Mlp::check() const {
  require(layer_sizes.size() >= 2, "Mlp: need at least input and output widths");
  require(weights.size() + 1 == layer_sizes.size() && biases.size() == weights.size(),
          "Mlp: tensor count does not match layer_sizes");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(layer_sizes[i] > 0 && layer_sizes[i + 1] > 0, "Mlp: layer widths must be positive");
    if (weights[i].rows() != layer_sizes[i] || weights[i].cols() != layer_sizes[i + 1] || biases[i].rows() != 1 ||
        biases[i].cols() != layer_sizes[i + 1]) {
      fail(ErrorCode::shape_mismatch, "Mlp: layer " + std::to_string(i) + " tensors do not match layer_sizes");
    }
  }
}

std::vector<int> layer_sizes_for(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

Mlp make_zero_mlp(std::vector<int> layer_sizes, Activation activation) {
  Mlp net;
  net.layer_sizes = std::move(layer_sizes);
  net.activation = activation;
  require(net.layer_sizes.size() >= 2, "Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < net.layer_sizes.size(); ++i) {
    net.weights.push_back(Matrix::Zero(net.layer_sizes[i], net.layer_sizes[i + 1]));
    net.biases.push_back(Matrix::Zero(1, net.layer_sizes[i + 1]));
  }
  net.check();
  return net;
}

Mlp make_mlp(std::vector<int> layer_sizes, Activation activation, Rng& rng) {
  Mlp net = make_zero_mlp(std::move(layer_sizes), activation);
  for (Matrix& w : net.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    w = sample_uniform(rng, w.rows(), w.cols(), -limit, limit);
  }
  return net;
}

MlpGrads zero_grads_like(const Mlp& net) {
  MlpGrads g;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    g.weights.push_back(Matrix::Zero(net.weights[i].rows(), net.weights[i].cols()));
    g.biases.push_back(Matrix::Zero(1, net.biases[i].cols()));
  }
  return g;
}

namespace {

void check_input(const Mlp& net, Eigen::Index cols) {
  if (cols != net.input_dim()) {
    fail(ErrorCode::shape_mismatch, "mlp_forward: expected input width " + std::to_string(net.input_dim()) + ", got " +
                                        std::to_string(cols));
  }
}

}  // namespace

Var mlp_forward(Tape& tape, const Mlp& net, const Var& input, ParamUse use) {
  check_input(net, input.cols());
  Var h = input;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    Var w, b;
    if (use == ParamUse::trainable) {
      w = tape.parameter(net.weights[i], {&net, 2 * i});
      b = tape.parameter(net.biases[i], {&net, 2 * i + 1});
    } else {
      w = tape.constant_view(net.weights[i]);
      b = tape.constant_view(net.biases[i]);
    }
    h = ops::affine(h, w, b);
    if (i + 1 < net.num_layers()) h = net.activation == Activation::relu ? ops::relu(h) : ops::tanh(h);
  }
  require_finite(h.value(), "mlp_forward output");
  return h;
}

Matrix mlp_forward(const Mlp& net, const Matrix& input) {
  check_input(net, input.cols());
  Matrix h = input;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    Matrix next = h * net.weights[i];
    next.rowwise() += net.biases[i].row(0);
    if (i + 1 < net.num_layers()) {
      if (net.activation == Activation::relu) {
        next = next.cwiseMax(0.0);
      } else {
        next = next.array().tanh().matrix();
      }
    }
    h = std::move(next);
  }
  require_finite(h, "mlp_forward output");
  return h;
}

MlpGrads gradients_for(const Tape& tape, const Mlp& net) {
  MlpGrads g;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    g.weights.push_back(tape.param_grad({&net, 2 * i}, net.weights[i].rows(), net.weights[i].cols()));
    g.biases.push_back(tape.param_grad({&net, 2 * i + 1}, 1, net.biases[i].cols()));
  }
  return g;
}

bool same_topology(const Mlp& a, const Mlp& b) {
  return a.layer_sizes == b.layer_sizes && a.activation == b.activation;
}

void polyak_blend(Mlp& target, const Mlp& online, double tau) {
  require(tau > 0.0 && tau <= 1.0, "polyak_blend: tau must lie in (0, 1]");
  if (!same_topology(target, online)) fail(ErrorCode::shape_mismatch, "polyak_blend: topology mismatch");
  if (tau == 1.0) {
    target.weights = online.weights;
    target.biases = online.biases;
    return;
  }
  for (std::size_t i = 0; i < target.num_layers(); ++i) {
    target.weights[i] = (1.0 - tau) * target.weights[i] + tau * online.weights[i];
    target.biases[i] = (1.0 - tau) * target.biases[i] + tau * online.biases[i];
  }
}

std::uint64_t parameter_hash(const Mlp& net) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  };
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    mix(net.weights[i]);
    mix(net.biases[i]);
  }
  return h;
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) fail(ErrorCode::numeric, what + ": non-finite value");
}

}  // namespace deflow
