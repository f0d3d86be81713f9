#pragma once

#include <initializer_list>
#include <vector>

#include "numerics/tape.hpp"

namespace deflow::ops {

// Differentiable primitives. All operands must live on the same tape.

Var matmul(const Var& a, const Var& b);
/// x·W + b with b a 1×out row broadcast over the batch.
Var affine(const Var& x, const Var& weight, const Var& bias);
Var relu(const Var& x);
Var tanh(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var square(const Var& a);

/// Elementwise clamp; gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

Var concat_cols(const std::vector<Var>& parts);
Var column(const Var& x, Eigen::Index j);

/// Per-row sum over columns: B×d → B×1.
Var row_sum(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);

/// Identity forward, annihilates the backward pass.
Var stop_gradient(const Var& x);

}  // namespace deflow::ops
