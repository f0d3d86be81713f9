#include <doctest.h>

#include <cmath>
#include <functional>

#include "common/error.hpp"
#include "gradcheck.hpp"
#include "numerics/adam.hpp"
#include "numerics/mlp.hpp"
#include "numerics/ops.hpp"
#include "numerics/rng.hpp"
#include "numerics/serialize.hpp"
#include "numerics/tape.hpp"

using namespace deflow;
using deflow::testing::check_gradients;
using deflow::testing::rel_error;

namespace {

Matrix mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> values) {
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (double v : values) m.data()[i++] = v;
  return m;
}

/// Central-difference check of d f / d x for a scalar-valued taped function of one input.
double max_input_grad_error(const Matrix& x0, const std::function<Var(Tape&, const Var&)>& f) {
  static int owner = 0;
  const ParamKey key{&owner, 0};
  Tape tape;
  const Var x = tape.parameter(x0, key);
  tape.backward(f(tape, x));
  const Matrix g = tape.param_grad(key, x0.rows(), x0.cols());
  double worst = 0.0;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Matrix xp = x0;
    Matrix xm = x0;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    Tape tp;
    Tape tm;
    const double lp = f(tp, tp.constant(xp)).scalar();
    const double lm = f(tm, tm.constant(xm)).scalar();
    worst = std::max(worst, rel_error(g.data()[i], (lp - lm) / (2 * h)));
  }
  return worst;
}

}  // namespace

TEST_CASE("every op's backward pass matches central differences") {
  Rng rng(3);
  const Matrix a = sample_uniform(rng, 3, 4, -1.5, 1.5);
  const Matrix b = sample_uniform(rng, 4, 2, -1.0, 1.0);
  const Matrix c = sample_uniform(rng, 3, 4, -1.0, 1.0);
  const Matrix bias = sample_uniform(rng, 1, 2, -1.0, 1.0);
  using F = std::function<Var(Tape&, const Var&)>;
  const std::vector<std::pair<const char*, F>> cases{
      {"matmul", [&](Tape& t, const Var& x) { return ops::sum(ops::square(ops::matmul(x, t.constant(b)))); }},
      {"affine",
       [&](Tape& t, const Var& x) {
         return ops::sum(ops::square(ops::affine(x, t.constant(b), t.constant(bias))));
       }},
      {"relu", [&](Tape&, const Var& x) { return ops::sum(ops::square(ops::relu(x))); }},
      {"tanh", [&](Tape&, const Var& x) { return ops::sum(ops::tanh(x)); }},
      {"add", [&](Tape& t, const Var& x) { return ops::sum(ops::square(ops::add(x, t.constant(c)))); }},
      {"sub", [&](Tape& t, const Var& x) { return ops::sum(ops::square(ops::sub(t.constant(c), x))); }},
      {"mul", [&](Tape& t, const Var& x) { return ops::sum(ops::mul(ops::mul(x, x), t.constant(c))); }},
      {"scale", [&](Tape&, const Var& x) { return ops::sum(ops::square(ops::scale(x, -2.5))); }},
      {"clamp", [&](Tape&, const Var& x) { return ops::sum(ops::square(ops::clamp(x, -0.9, 0.8))); }},
      {"concat+column",
       [&](Tape& t, const Var& x) {
         return ops::sum(ops::square(ops::column(ops::concat_cols({t.constant(c), x, x}), 5)));
       }},
      {"row_sum", [&](Tape&, const Var& x) { return ops::sum(ops::square(ops::row_sum(x))); }},
      {"mean", [&](Tape&, const Var& x) { return ops::mean(ops::square(x)); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    CHECK(max_input_grad_error(a, f) < 1e-6);
  }
}

TEST_CASE("clamp passes gradient only strictly inside the interval") {
  Tape tape;
  static int owner = 0;
  const Matrix v = mat(1, 3, {-2.0, 0.5, 2.0});
  const Var x = tape.parameter(v, {&owner, 0});
  tape.backward(ops::sum(ops::clamp(x, -1.0, 1.0)));
  const Matrix g = tape.param_grad({&owner, 0}, 1, 3);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(0, 2) == 0.0);
}

TEST_CASE("stop_gradient is the identity forward and blocks backward") {
  static int owner = 0;
  const ParamKey key{&owner, 0};
  const Matrix w = mat(2, 2, {0.3, -0.7, 1.1, 0.2});

  SUBCASE("forward is unchanged") {
    Tape tape;
    const Var x = tape.parameter(w, key);
    CHECK(ops::stop_gradient(x).value() == x.value());
  }
  SUBCASE("sum(sg(W)) has zero gradient") {
    Tape tape;
    const Var x = tape.parameter(w, key);
    tape.backward(ops::sum(ops::stop_gradient(x)));
    CHECK(tape.param_grad(key, 2, 2).isZero(0.0));
  }
  SUBCASE("sum(sg(W*W) * W) keeps only the second factor's path") {
    Tape tape;
    const Var x = tape.parameter(w, key);
    tape.backward(ops::sum(ops::mul(ops::stop_gradient(ops::mul(x, x)), x)));
    // Product rule would give 3W²; with the first factor detached only W² remains.
    const Matrix expected = w.cwiseProduct(w);
    CHECK((tape.param_grad(key, 2, 2) - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("tape rejects non-scalar losses and foreign variables") {
  Tape tape;
  const Var x = tape.constant(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(x), Error);
  Tape other;
  const Var y = other.constant(Matrix::Ones(1, 1));
  CHECK_THROWS_AS(tape.backward(y), Error);
  CHECK_THROWS_AS(ops::add(x, y), Error);
}

TEST_CASE("shape mismatches raise errors naming the shapes") {
  Tape tape;
  const Var a = tape.constant(Matrix::Ones(2, 3));
  const Var b = tape.constant(Matrix::Ones(2, 3));
  try {
    (void)ops::matmul(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape_mismatch);
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
}

TEST_CASE("mlp forward: zero, identity and hand-computed networks") {
  SUBCASE("zero parameters give zero output") {
    const Mlp net = make_zero_mlp({3, 8, 2}, Activation::relu);
    CHECK(mlp_forward(net, mat(2, 3, {1, -2, 3, 0.5, 0.25, -9})).isZero(0.0));
  }
  SUBCASE("identity single layer") {
    Mlp net = make_zero_mlp({2, 2}, Activation::relu);
    net.weights[0] = Matrix::Identity(2, 2);
    const Matrix out = mlp_forward(net, mat(1, 2, {0.3, -0.7}));
    CHECK(out(0, 0) == 0.3);
    CHECK(out(0, 1) == -0.7);
  }
  SUBCASE("one hidden relu layer, input (1, 1)") {
    Mlp net = make_zero_mlp({2, 2, 1}, Activation::relu);
    net.weights[0] = mat(2, 2, {0.5, -1.0, 0.25, 0.5});
    net.biases[0] = mat(1, 2, {0.1, -0.2});
    net.weights[1] = mat(2, 1, {1.0, 2.0});
    net.biases[1] = mat(1, 1, {0.3});
    // hidden pre-activation (0.85, -0.7) -> relu (0.85, 0) -> 0.85 + 0.3
    CHECK(mlp_forward(net, mat(1, 2, {1.0, 1.0}))(0, 0) == doctest::Approx(1.15).epsilon(1e-15));
  }
  SUBCASE("taped and untaped forwards agree") {
    Rng rng(5);
    const Mlp net = make_mlp({3, 16, 16, 2}, Activation::tanh, rng);
    const Matrix x = sample_standard_normal(rng, 7, 3);
    Tape tape;
    CHECK((mlp_forward(tape, net, tape.constant(x)).value() - mlp_forward(net, x)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("mlp topology invariants") {
  Rng rng(1);
  const Mlp net = make_mlp(layer_sizes_for(5, {64, 64}, 2), Activation::relu, rng);
  CHECK(net.parameter_count() == static_cast<std::size_t>((5 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 2));
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    CHECK(net.weights[i].rows() == net.layer_sizes[i]);
    CHECK(net.weights[i].cols() == net.layer_sizes[i + 1]);
    const double bound = std::sqrt(6.0 / (net.layer_sizes[i] + net.layer_sizes[i + 1]));
    CHECK(net.weights[i].cwiseAbs().maxCoeff() <= bound);
    CHECK(net.biases[i].isZero(0.0));
  }
  Mlp bad = net;
  bad.weights[1] = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(bad.check(), Error);
  CHECK_THROWS_AS(mlp_forward(net, Matrix::Zero(1, 4)), Error);
}

TEST_CASE("non-finite outputs are errors") {
  Mlp net = make_zero_mlp({1, 1}, Activation::relu);
  net.weights[0](0, 0) = 1e308;
  CHECK_THROWS_AS(mlp_forward(net, mat(1, 1, {1e10})), Error);
}

TEST_CASE("least-squares gradient matches its closed form") {
  Rng rng(9);
  Mlp net = make_mlp({4, 3}, Activation::relu, rng);
  const Matrix x = sample_standard_normal(rng, 1, 4);
  Tape tape;
  const Var y = mlp_forward(tape, net, tape.constant(x));
  tape.backward(ops::sum(ops::square(y)));
  const MlpGrads g = gradients_for(tape, net);
  const Matrix out = x * net.weights[0] + net.biases[0];
  const Matrix expected = 2.0 * x.transpose() * out;
  CHECK((g.weights[0] - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((g.biases[0] - 2.0 * out).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("parameters the loss does not use get zero gradient") {
  Rng rng(2);
  Mlp used = make_mlp({2, 3}, Activation::tanh, rng);
  Mlp unused = make_mlp({2, 3}, Activation::tanh, rng);
  Tape tape;
  const Var x = tape.constant(Matrix::Ones(1, 2));
  (void)mlp_forward(tape, unused, x);
  tape.backward(ops::sum(mlp_forward(tape, used, x)));
  const MlpGrads g = gradients_for(tape, unused);
  CHECK(g.weights[0].isZero(0.0));
  CHECK(g.biases[0].isZero(0.0));
}

TEST_CASE("frozen parameters pass gradient to the input but accumulate none") {
  Rng rng(4);
  Mlp net = make_mlp({2, 4, 1}, Activation::tanh, rng);
  static int owner = 0;
  Tape tape;
  const Matrix v = mat(1, 2, {0.2, -0.4});
  const Var x = tape.parameter(v, {&owner, 0});
  tape.backward(ops::sum(mlp_forward(tape, net, x, ParamUse::frozen)));
  CHECK(gradients_for(tape, net).weights[0].isZero(0.0));
  CHECK_FALSE(tape.param_grad({&owner, 0}, 1, 2).isZero(0.0));
}

TEST_CASE("mlp parameter gradients match central differences") {
  Rng rng(11);
  for (Activation act : {Activation::tanh, Activation::relu}) {
    Mlp net = make_mlp({3, 10, 10, 2}, act, rng);
    const Matrix x = sample_standard_normal(rng, 6, 3);
    const auto loss = [&](Tape& t) { return ops::mean(ops::square(mlp_forward(t, net, t.constant(x)))); };
    Rng pick(1);
    const auto r = check_gradients(net, loss, pick, 100);
    CHECK(r.checked == 100);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("adam: zero gradient leaves parameters and decays moments") {
  Mlp net = make_zero_mlp({1, 1}, Activation::relu);
  net.weights[0](0, 0) = 0.5;
  AdamState s = make_adam(net, {});
  s.first.weights[0](0, 0) = 0.2;
  s.second.weights[0](0, 0) = 0.4;
  adam_step(net, zero_grads_like(net), s);
  CHECK(s.first.weights[0](0, 0) == doctest::Approx(0.18));
  CHECK(s.second.weights[0](0, 0) == doctest::Approx(0.3996));
  // m̂/√v̂ is not zero here, so only the all-zero state is a true fixed point.
  Mlp fresh = make_zero_mlp({1, 1}, Activation::relu);
  AdamState fs = make_adam(fresh, {});
  adam_step(fresh, zero_grads_like(fresh), fs);
  CHECK(fresh.weights[0](0, 0) == 0.0);
}

TEST_CASE("adam: first step is -lr*sign(g) up to eps") {
  Mlp net = make_zero_mlp({1, 2}, Activation::relu);
  AdamState s = make_adam(net, {0.01, 0.9, 0.999, 1e-8});
  MlpGrads g = zero_grads_like(net);
  g.weights[0] = mat(1, 2, {3.0, -0.25});
  adam_step(net, g, s);
  CHECK(net.weights[0](0, 0) == doctest::Approx(-0.01).epsilon(1e-7));
  CHECK(net.weights[0](0, 1) == doctest::Approx(0.01).epsilon(1e-7));
}

TEST_CASE("adam: two hand-computed steps on one scalar") {
  Mlp net = make_zero_mlp({1, 1}, Activation::relu);
  net.weights[0](0, 0) = 0.5;
  AdamState s = make_adam(net, {0.1, 0.9, 0.999, 1e-8});
  MlpGrads g = zero_grads_like(net);

  g.weights[0](0, 0) = 1.0;
  adam_step(net, g, s);
  // m = 0.1, v = 0.001; both bias corrections give exactly g and g².
  const double theta1 = 0.5 - 0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(net.weights[0](0, 0) == doctest::Approx(theta1).epsilon(1e-14));

  g.weights[0](0, 0) = -2.0;
  adam_step(net, g, s);
  const double m2 = 0.9 * 0.1 + 0.1 * -2.0;
  const double v2 = 0.999 * 0.001 + 0.001 * 4.0;
  const double mhat = m2 / (1.0 - 0.9 * 0.9);
  const double vhat = v2 / (1.0 - 0.999 * 0.999);
  const double theta2 = theta1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(net.weights[0](0, 0) == doctest::Approx(theta2).epsilon(1e-13));
  CHECK(s.step == 2);
}

TEST_CASE("polyak blending") {
  Mlp target = make_zero_mlp({1, 1}, Activation::relu);
  Mlp online = make_zero_mlp({1, 1}, Activation::relu);
  online.weights[0](0, 0) = 2.0;
  online.biases[0](0, 0) = -1.0;

  SUBCASE("tau 1 copies exactly") {
    polyak_blend(target, online, 1.0);
    CHECK(parameter_hash(target) == parameter_hash(online));
  }
  SUBCASE("tau 0.5 from 0 towards 2 gives 1") {
    polyak_blend(target, online, 0.5);
    CHECK(target.weights[0](0, 0) == 1.0);
  }
  SUBCASE("repeated blending leaves a (1 - tau)^n residual") {
    const double tau = 0.1;
    for (int i = 0; i < 25; ++i) polyak_blend(target, online, tau);
    CHECK(2.0 - target.weights[0](0, 0) == doctest::Approx(2.0 * std::pow(0.9, 25)).epsilon(1e-12));
  }
  SUBCASE("tau outside (0, 1] is rejected") {
    CHECK_THROWS_AS(polyak_blend(target, online, 0.0), Error);
    CHECK_THROWS_AS(polyak_blend(target, online, 1.5), Error);
  }
}

TEST_CASE("rng determinism, independence and moments") {
  SUBCASE("same seed gives identical draws") {
    Rng a(42);
    Rng b(42);
    CHECK(sample_standard_normal(a, 5, 3) == sample_standard_normal(b, 5, 3));
  }
  SUBCASE("named streams differ from each other and are stable") {
    Rng a = Rng::derive(7, "flow-train");
    Rng b = Rng::derive(7, "critic-train");
    Rng c = Rng::derive(7, "flow-train");
    const auto x = a.next_u64();
    CHECK(x != b.next_u64());
    CHECK(x == c.next_u64());
  }
  SUBCASE("split does not advance the parent") {
    Rng a(9);
    Rng b(9);
    (void)a.split(3);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(9).split(0).next_u64() != Rng(9).split(1).next_u64());
  }
  SUBCASE("100k normals have mean 0 and variance 1") {
    Rng r(42);
    const Matrix z = sample_standard_normal(r, 100000, 1);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
  }
  SUBCASE("uniform stays in [0, 1) and below stays in range") {
    Rng r(5);
    for (int i = 0; i < 10000; ++i) {
      const double u = r.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      CHECK(r.below(7) < 7);
    }
  }
  SUBCASE("zero-sized requests give empty matrices") {
    Rng r(1);
    CHECK(sample_standard_normal(r, 0, 3).size() == 0);
    CHECK(sample_standard_normal(r, 4, 0).size() == 0);
  }
}

TEST_CASE("mlp json round trip is exact") {
  Rng rng(13);
  Mlp net = make_mlp({3, 5, 2}, Activation::tanh, rng);
  net.biases[0](0, 1) = -0.0;
  net.biases[1](0, 0) = 4.9406564584124654e-324;
  net.weights[0](0, 0) = 0.1 + 0.2;
  const Mlp back = mlp_from_json(nlohmann::json::parse(mlp_to_json(net).dump()));
  CHECK(parameter_hash(back) == parameter_hash(net));
  CHECK(back.layer_sizes == net.layer_sizes);
  CHECK(back.activation == net.activation);

  nlohmann::json broken = mlp_to_json(net);
  broken["tensors"]["w0"]["values"].erase(0);
  CHECK_THROWS_AS(mlp_from_json(broken), Error);
}
