#include <doctest.h>

#include <cmath>

#include "common/error.hpp"
#include "critic/critic.hpp"
#include "envs/envs.hpp"
#include "gradcheck.hpp"

using namespace deflow;

namespace {

/// A head whose output is the constant `value` for every input.
Mlp constant_head(int input_dim, double value) {
  Mlp m = make_zero_mlp({input_dim, 8, 1}, Activation::relu);
  m.biases.back()(0, 0) = value;
  return m;
}

CriticEnsemble constant_critic(double q1, double q2, double gamma) {
  CriticEnsemble c;
  c.online = {constant_head(4, q1), constant_head(4, q2)};
  c.target = c.online;
  c.gamma = gamma;
  c.tau = 0.005;
  return c;
}

Batch single_batch(double reward, bool terminal, Eigen::Index rows = 1) {
  Batch b;
  b.states = Matrix::Constant(rows, 2, 0.1);
  b.actions = Matrix::Constant(rows, 2, -0.2);
  b.rewards = Matrix::Constant(rows, 1, reward);
  b.next_states = Matrix::Constant(rows, 2, 0.1);
  b.terminals = Matrix::Constant(rows, 1, terminal ? 1.0 : 0.0);
  return b;
}

}  // namespace

TEST_CASE("TD targets") {
  const Matrix next = Matrix::Zero(1, 2);
  SUBCASE("the smaller target head is bootstrapped") {
    const CriticEnsemble c = constant_critic(3.0, 5.0, 0.99);
    CHECK(td_targets(c, single_batch(1.0, false), next)(0, 0) == doctest::Approx(3.97).epsilon(1e-15));
    const CriticEnsemble swapped = constant_critic(5.0, 3.0, 0.99);
    CHECK(td_targets(swapped, single_batch(1.0, false), next)(0, 0) == doctest::Approx(3.97).epsilon(1e-15));
  }
  SUBCASE("terminal transitions do not bootstrap") {
    const CriticEnsemble c = constant_critic(3.0, 5.0, 0.99);
    CHECK(td_targets(c, single_batch(1.0, true), next)(0, 0) == 1.0);
  }
  SUBCASE("gamma 0 reduces to the reward") {
    const CriticEnsemble c = constant_critic(3.0, 5.0, 0.0);
    CHECK(td_targets(c, single_batch(-0.7, false), next)(0, 0) == -0.7);
  }
  SUBCASE("targets read the target heads, not the online ones") {
    CriticEnsemble c = constant_critic(3.0, 5.0, 0.5);
    c.online = {constant_head(4, 100.0), constant_head(4, 100.0)};
    CHECK(td_targets(c, single_batch(0.0, false), next)(0, 0) == 1.5);
  }
  SUBCASE("one next action per row") {
    const CriticEnsemble c = constant_critic(3.0, 5.0, 0.5);
    CHECK_THROWS_AS(td_targets(c, single_batch(0.0, false, 3), next), Error);
  }
}

TEST_CASE("critic loss examples") {
  const CriticEnsemble c = constant_critic(2.0, 2.0, 0.9);
  const Batch b = single_batch(0.0, false, 4);
  Tape t1;
  CHECK(critic_loss(t1, c, b.states, b.actions, Matrix::Constant(4, 1, 2.0)).scalar() == 0.0);
  Tape t2;
  CHECK(critic_loss(t2, c, b.states, b.actions, Matrix::Constant(4, 1, 1.0)).scalar() == 1.0);
  // Head errors 1 and 3: (1 + 9) / 2.
  const CriticEnsemble split = constant_critic(2.0, 4.0, 0.9);
  Tape t3;
  CHECK(critic_loss(t3, split, b.states, b.actions, Matrix::Constant(4, 1, 1.0)).scalar() == 5.0);
}

TEST_CASE("critic update mechanics") {
  Rng rng(1);
  const Batch b = single_batch(1.0, false, 8);
  const Matrix next = Matrix::Zero(8, 2);
  SUBCASE("tau 1 copies the online heads into the targets") {
    CriticEnsemble c = CriticEnsemble::create(2, 2, {16}, Activation::tanh, 1.0, 0.9, rng);
    CriticOptimizer opt = make_critic_optimizer(c, AdamConfig{1e-2});
    critic_update(c, opt, b, next);
    for (int i = 0; i < 2; ++i) {
      CHECK(parameter_hash(c.target[i]) == parameter_hash(c.online[i]));
    }
  }
  SUBCASE("a zero learning rate changes nothing") {
    CriticEnsemble c = CriticEnsemble::create(2, 2, {16}, Activation::tanh, 0.5, 0.9, rng);
    const std::uint64_t before = parameter_hash(c.online[0]) ^ parameter_hash(c.target[1]);
    CriticOptimizer opt = make_critic_optimizer(c, AdamConfig{0.0});
    const double loss = critic_update(c, opt, b, next);
    CHECK(std::isfinite(loss));
    CHECK((parameter_hash(c.online[0]) ^ parameter_hash(c.target[1])) == before);
  }
  SUBCASE("the update returns the pre-step loss") {
    CriticEnsemble c = CriticEnsemble::create(2, 2, {16}, Activation::tanh, 0.5, 0.9, rng);
    const Matrix y = td_targets(c, b, next);
    Tape tape;
    const double expected = critic_loss(tape, c, b.states, b.actions, y).scalar();
    CriticOptimizer opt = make_critic_optimizer(c, AdamConfig{1e-3});
    CHECK(critic_update(c, opt, b, next) == expected);
  }
  SUBCASE("invalid hyperparameters are rejected") {
    CHECK_THROWS_AS(CriticEnsemble::create(2, 2, {16}, Activation::tanh, 0.0, 0.9, rng), Error);
    CHECK_THROWS_AS(CriticEnsemble::create(2, 2, {16}, Activation::tanh, 0.5, 1.0, rng), Error);
  }
}

TEST_CASE("critic loss gradients match central differences") {
  Rng rng(2);
  CriticEnsemble c = CriticEnsemble::create(2, 2, {12, 12}, Activation::tanh, 0.005, 0.9, rng);
  const Matrix s = sample_uniform(rng, 6, 2, -1, 1);
  const Matrix a = sample_uniform(rng, 6, 2, -1, 1);
  const Matrix y = sample_uniform(rng, 6, 1, -2, 2);
  for (int head = 0; head < 2; ++head) {
    const auto loss = [&](Tape& t) { return critic_loss(t, c, s, a, y); };
    Rng pick(static_cast<std::uint64_t>(head));
    const auto r = testing::check_gradients(c.online[head], loss, pick, 50);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("TD learning converges on a single self-loop") {
  // r = 1 forever with γ = 0.5 has value 1 / (1 − 0.5) = 2.
  Rng rng(3);
  CriticEnsemble c = CriticEnsemble::create(2, 2, {32, 32}, Activation::relu, 0.05, 0.5, rng);
  CriticOptimizer opt = make_critic_optimizer(c, AdamConfig{1e-3});
  const Batch b = single_batch(1.0, false, 32);
  for (int i = 0; i < 3000; ++i) critic_update(c, opt, b, b.actions);
  for (int h = 0; h < 2; ++h) CHECK(q_values(c.online[h], b.states, b.actions)(0, 0) == doctest::Approx(2.0).epsilon(0.025));
}

TEST_CASE("gamma 0 regresses the bandit reward") {
  const MultimodalBandit env{BanditConfig{}};
  Rng data(4);
  const TransitionStore train = generate_bandit_dataset(env, 4000, 0.15, data);
  CriticEnsemble c = CriticEnsemble::create(2, 2, {64, 64}, Activation::relu, 0.005, 0.0, data);
  CriticOptimizer opt = make_critic_optimizer(c, AdamConfig{1e-3});
  Rng batches(5);
  for (int i = 0; i < 3000; ++i) {
    const Batch b = sample_batch(train, 128, batches);
    critic_update(c, opt, b, b.actions);
  }
  const TransitionStore test = generate_bandit_dataset(env, 1000, 0.15, data);
  Rng all(6);
  const Batch b = sample_batch(test, 1000, all);
  const Matrix q = q_values(c.online[0], b.states, b.actions);
  const double mse = (q - b.rewards).squaredNorm() / 1000.0;
  CAPTURE(mse);
  CHECK(mse <= 0.05);
}
