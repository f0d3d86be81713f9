#pragma once

#include <cstdint>
#include <vector>

#include "baselines/onestep.hpp"
#include "envs/envs.hpp"
#include "refinement/refinement.hpp"

namespace deflow {

/// An action sampler driven by externally supplied noise, so the caller owns
/// every random draw.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int noise_dim() const = 0;
  virtual Matrix act(const Matrix& states, const Matrix& z) const = 0;
};

class CompositeActor final : public Policy {
 public:
  explicit CompositeActor(CompositePolicy policy) : policy_(policy) {}
  int noise_dim() const override { return policy_.flow->action_dim(); }
  Matrix act(const Matrix& states, const Matrix& z) const override { return compose_action(policy_, states, z).action; }

 private:
  CompositePolicy policy_;
};

class OneStepActor final : public Policy {
 public:
  explicit OneStepActor(const OneStepPolicy& policy) : policy_(&policy) {}
  int noise_dim() const override { return policy_->action_dim(); }
  Matrix act(const Matrix& states, const Matrix& z) const override { return policy_->act(states, z); }

 private:
  const OneStepPolicy* policy_;
};

/// Always returns the same action; used for oracle rigs.
class ConstantActor final : public Policy {
 public:
  explicit ConstantActor(Vec2 action) : action_(action) {}
  int noise_dim() const override { return 2; }
  Matrix act(const Matrix& states, const Matrix&) const override {
    Matrix out(states.rows(), 2);
    out.col(0).setConstant(action_.x);
    out.col(1).setConstant(action_.y);
    return out;
  }

 private:
  Vec2 action_;
};

struct EvalStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> per_episode;
  /// First action of every episode (the only one on the bandit).
  std::vector<Vec2> first_actions;
  /// Maze only: whether each episode entered the left / right corridor.
  std::vector<bool> used_left;
  std::vector<bool> used_right;
};

/// Rolls out `episodes` episodes. Episode i draws its noise from its own
/// stream Rng(seed).split(i), so results depend only on (policy, env, seed).
/// Episodes are stepped as one batch.
EvalStats evaluate(const Policy& policy, const Environment& env, int episodes, std::uint64_t seed);

}  // namespace deflow
