#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "numerics/rng.hpp"
#include "numerics/tape.hpp"

namespace deflow {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected network. The activation is applied to hidden layers only;
/// the output layer is linear. weights[i] is fan_in × fan_out, biases[i] is
/// 1 × fan_out.
struct Mlp {
  std::vector<int> layer_sizes;
  Activation activation = Activation::relu;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Validates the topology invariants; throws on violation.
  void check() const;
};

/// All-zero parameters with the given topology.
Mlp make_zero_mlp(std::vector<int> layer_sizes, Activation activation);
/// Glorot-uniform weights, zero biases.
Mlp make_mlp(std::vector<int> layer_sizes, Activation activation, Rng& rng);
/// Convenience: input → hidden... → output.
std::vector<int> layer_sizes_for(int input, const std::vector<int>& hidden, int output);

/// Gradients congruent with an Mlp's parameters.
struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

MlpGrads zero_grads_like(const Mlp& net);

/// How an Mlp's tensors enter a tape: as trainable leaves, or as constants the
/// gradient flows through to the input without being accumulated.
enum class ParamUse { trainable, frozen };

/// Taped forward pass.
Var mlp_forward(Tape& tape, const Mlp& net, const Var& input, ParamUse use = ParamUse::trainable);
/// Untaped forward pass for inference.
Matrix mlp_forward(const Mlp& net, const Matrix& input);

/// Gradient of the tape's last backward pass with respect to `net`.
MlpGrads gradients_for(const Tape& tape, const Mlp& net);

/// target ← (1 − tau)·target + tau·online for every tensor.
void polyak_blend(Mlp& target, const Mlp& online, double tau);

/// FNV-1a over the raw bytes of every tensor; identical iff bitwise identical
/// (modulo hash collisions).
std::uint64_t parameter_hash(const Mlp& net);

bool same_topology(const Mlp& a, const Mlp& b);

/// Throws ErrorCode::numeric if any entry is NaN or infinite.
void require_finite(const Matrix& m, const std::string& what);

}  // namespace deflow
