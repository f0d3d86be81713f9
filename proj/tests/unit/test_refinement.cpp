#include <doctest.h>

#include <cmath>

#include "common/error.hpp"
#include "gradcheck.hpp"
#include "numerics/adam.hpp"
#include "numerics/ops.hpp"
#include "refinement/refinement.hpp"

using namespace deflow;

namespace {

Matrix mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> values) {
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (double v : values) m.data()[i++] = v;
  return m;
}

/// Refinement net with all weights zero and output bias `b`: Δa ≡ b.
Mlp bias_only_refine(double bx, double by) {
  Mlp m = make_zero_mlp({4, 8, 2}, Activation::tanh);
  m.biases.back() = mat(1, 2, {bx, by});
  return m;
}

/// A flow whose field is zero, so euler_sample returns clamp(z).
FlowPolicy identity_flow() { return FlowPolicy(make_zero_mlp({5, 8, 2}, Activation::relu), 2, 2, 10); }

const QOnTape zero_q = [](Tape& tape, const Var& s, const Var&) {
  return tape.constant(Matrix::Zero(s.value().rows(), 1));
};

/// Q(s, a) = ‖a‖².
const QOnTape norm_q = [](Tape&, const Var&, const Var& a) { return ops::row_sum(ops::square(a)); };

/// Q(s, a) = a_x.
const QOnTape x_q = [](Tape&, const Var&, const Var& a) { return ops::column(a, 0); };

}  // namespace

TEST_CASE("a fresh refinement net reproduces the flow") {
  Rng rng(1);
  const FlowPolicy flow = FlowPolicy::create(2, 2, {16, 16}, Activation::relu, 10, rng);
  const Mlp refine = make_refinement_net(2, 2, {16, 16}, Activation::relu, rng);
  const Matrix s = sample_uniform(rng, 32, 2, -1, 1);
  const Matrix z = sample_standard_normal(rng, 32, 2);
  const ComposedAction out = compose_action(CompositePolicy{&flow, &refine}, s, z);
  CHECK(out.delta.isZero(0.0));
  CHECK(out.action == euler_sample(flow, s, z));
  CHECK(out.action == compose_action(CompositePolicy{&flow, nullptr}, s, z).action);
}

TEST_CASE("composition adds the residual and clamps") {
  const FlowPolicy flow = identity_flow();
  const Mlp refine = bias_only_refine(0.2, -0.1);
  const Matrix s = Matrix::Zero(2, 2);
  const Matrix z = mat(2, 2, {0.9, 0.0, 0.1, -0.95});
  const ComposedAction out = compose_action(CompositePolicy{&flow, &refine}, s, z);
  CHECK(out.base == z);
  CHECK(out.action(0, 0) == 1.0);
  CHECK(out.action(0, 1) == doctest::Approx(-0.1));
  CHECK(out.action(1, 0) == doctest::Approx(0.3));
  CHECK(out.action(1, 1) == -1.0);
  CHECK_THROWS_AS(compose_action(CompositePolicy{nullptr, &refine}, s, z), Error);
}

TEST_CASE("refinement loss with a zero critic is the pure penalty") {
  const Mlp refine = bias_only_refine(0.3, 0.4);
  const Matrix s = Matrix::Zero(5, 2);
  const Matrix base = Matrix::Constant(5, 2, 0.1);
  Tape tape;
  const RefinementForward fwd = refinement_forward(tape, refine, zero_q, s, base);
  CHECK(fwd.mean_sq_residual == doctest::Approx(0.25));
  CHECK(refinement_loss(fwd, 1.0, 2.0).scalar() == doctest::Approx(0.5));
  CHECK(refinement_loss(fwd, 7.0, 2.0).scalar() == doctest::Approx(0.5));
  CHECK_THROWS_AS(refinement_loss(fwd, 0.0, 2.0), Error);
}

TEST_CASE("refinement gradient under a quadratic critic") {
  // L = mean[−‖a_base + b‖² / q + α‖b‖²], so ∂L/∂b = −2·mean(a_base + b) / q + 2αb.
  Mlp refine = bias_only_refine(0.05, -0.1);
  const Matrix s = Matrix::Zero(3, 2);
  const Matrix base = mat(3, 2, {0.2, -0.3, 0.1, 0.4, 0.0, -0.5});
  const double q_scale = 1.7;
  const double alpha = 0.8;
  Tape tape;
  const RefinementForward fwd = refinement_forward(tape, refine, norm_q, s, base);
  tape.backward(refinement_loss(fwd, q_scale, alpha));
  const Matrix g = gradients_for(tape, refine).biases.back();
  const Matrix b = refine.biases.back();
  const Matrix mean_action = (base.colwise().mean() + b);
  const Matrix expected = -2.0 * mean_action / q_scale + 2.0 * alpha * b;
  CHECK((g - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Q normalization") {
  QNormState q;
  const QNormState first = update_qnorm(q, Matrix::Constant(4, 1, -5.0));
  CHECK(first.initialized);
  CHECK(first.running == 5.0);
  QNormState from_one = first;
  from_one.running = 1.0;
  CHECK(update_qnorm(from_one, Matrix::Constant(4, 1, 5.0)).running == doctest::Approx(1.04));
  QNormState state = first;
  for (int i = 0; i < 2000; ++i) state = update_qnorm(state, Matrix::Constant(4, 1, 2.0));
  CHECK(state.running == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(update_qnorm(QNormState{}, Matrix::Zero(3, 1)).running == 1e-6);
  CHECK_THROWS_AS(update_qnorm(state, Matrix(0, 1)), Error);
}

TEST_CASE("the flow receives no gradient from the refinement objective") {
  Rng rng(2);
  const FlowPolicy flow = FlowPolicy::create(2, 2, {16}, Activation::tanh, 4, rng);
  Mlp refine = make_mlp({4, 16, 2}, Activation::tanh, rng);
  const Matrix s = sample_uniform(rng, 8, 2, -1, 1);
  const Matrix z = 0.3 * sample_standard_normal(rng, 8, 2);

  SUBCASE("through the stop-gradient nothing reaches the flow") {
    Tape tape;
    const Var base = euler_sample_on_tape(tape, flow, s, z);
    const RefinementForward fwd = refinement_forward(tape, refine, x_q, s, base);
    tape.backward(refinement_loss(fwd, 1.0, 0.5));
    const MlpGrads fg = gradients_for(tape, flow.field());
    for (const Matrix& w : fg.weights) CHECK(w.isZero(0.0));
    for (const Matrix& b : fg.biases) CHECK(b.isZero(0.0));
    CHECK_FALSE(gradients_for(tape, refine).weights[0].isZero(0.0));
  }
  SUBCASE("the taped rollout itself is differentiable, so the check above is meaningful") {
    Tape tape;
    tape.backward(ops::sum(euler_sample_on_tape(tape, flow, s, z)));
    CHECK_FALSE(gradients_for(tape, flow.field()).weights[0].isZero(0.0));
  }
}

TEST_CASE("a frozen critic head receives no gradient from the refinement objective") {
  Rng rng(3);
  const Mlp head = make_mlp({4, 16, 1}, Activation::tanh, rng);
  Mlp refine = make_mlp({4, 16, 2}, Activation::tanh, rng);
  const Matrix s = sample_uniform(rng, 8, 2, -1, 1);
  const Matrix base = sample_uniform(rng, 8, 2, -0.5, 0.5);
  Tape tape;
  const RefinementForward fwd = refinement_forward(tape, refine, q_head(head, ParamUse::frozen), s, base);
  tape.backward(refinement_loss(fwd, 1.0, 0.5));
  CHECK(gradients_for(tape, head).weights[0].isZero(0.0));
  CHECK_FALSE(gradients_for(tape, refine).weights[0].isZero(0.0));
}

TEST_CASE("refinement loss gradients match central differences") {
  Rng rng(4);
  const Mlp head = make_mlp({4, 16, 16, 1}, Activation::tanh, rng);
  Mlp refine = make_mlp({4, 16, 16, 2}, Activation::tanh, rng);
  for (auto& w : refine.weights) w *= 0.3;
  const Matrix s = sample_uniform(rng, 10, 2, -1, 1);
  const Matrix base = sample_uniform(rng, 10, 2, -0.4, 0.4);
  const auto loss = [&](Tape& t) {
    return refinement_loss(refinement_forward(t, refine, q_head(head, ParamUse::frozen), s, base), 1.3, 0.7);
  };
  Rng pick(5);
  const auto r = testing::check_gradients(refine, loss, pick, 80);
  CHECK(r.checked == 80);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("a huge multiplier pins the residual at zero") {
  const Matrix s = Matrix::Zero(16, 2);
  const Matrix base = Matrix::Zero(16, 2);
  const auto train = [&](double alpha) {
    Rng rng(6);
    Mlp refine = make_refinement_net(2, 2, {16}, Activation::tanh, rng);
    AdamState opt = make_adam(refine, AdamConfig{1e-3});
    double c = 0.0;
    for (int i = 0; i < 300; ++i) {
      Tape tape;
      const RefinementForward fwd = refinement_forward(tape, refine, x_q, s, base);
      tape.backward(refinement_loss(fwd, 1.0, alpha));
      adam_step(refine, gradients_for(tape, refine), opt);
      c = fwd.mean_sq_residual;
    }
    return c;
  };
  const double pinned = train(1e6);
  const double free = train(0.0);
  CAPTURE(pinned);
  CAPTURE(free);
  CHECK(pinned < 1e-4);
  CHECK(free > 1e-2);
}
