#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "data/iav.hpp"
#include "envs/envs.hpp"
#include "numerics/mlp.hpp"

namespace deflow {

enum class Algo { deflow, bc, onestep };
enum class AlphaMode { adaptive, fixed };

std::string to_string(Algo a);
Algo algo_from_string(const std::string& name);

struct EnvSpec {
  bool is_bandit = true;
  BanditConfig bandit;
  MazeConfig maze;

  Environment make() const;
  double noise_scale() const { return is_bandit ? bandit.noise_scale : maze.noise_scale; }
};

struct TrainerConfig {
  EnvSpec env;
  Algo algo = Algo::deflow;

  std::int64_t offline_steps = 20000;
  std::int64_t online_steps = 0;
  int batch_size = 256;
  double gamma = 0.99;
  double tau = 0.005;

  double lr_flow = 1e-3;
  double lr_refine = 3e-4;
  double lr_critic = 3e-4;
  double lr_onestep = 3e-4;
  double lr_alpha = 0.05;

  int flow_steps = 20;
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::relu;

  /// Trust-region budget; derived from the dataset's IAV via task_class when unset.
  std::optional<double> delta;
  TaskClass task_class = TaskClass::navigation;
  int iav_k = 5;

  AlphaMode alpha_mode = AlphaMode::adaptive;
  double initial_alpha = 1.0;
  double alpha_bc = 0.3;

  // Offline-to-online knobs.
  bool freeze_prior = false;
  double mix_ratio = 0.5;
  std::int64_t online_capacity = 100000;
  std::int64_t online_warmup = 1000;

  std::int64_t eval_every = 1000;
  int eval_episodes = 100;
  std::uint64_t seed = 0;

  /// Throws on any out-of-range field.
  void validate() const;
};

/// Fills defaults for every absent key; unknown keys, at any level, are errors.
TrainerConfig config_from_json(const nlohmann::json& doc);
/// Fully resolved echo (every field present).
nlohmann::json config_to_json(const TrainerConfig& config);
nlohmann::json env_to_json(const EnvSpec& env);
EnvSpec env_from_json(const nlohmann::json& doc);

/// True when two configs agree on everything except the offline-to-online
/// knobs, the step budgets and the seed. `first_difference` names the
/// first differing key.
bool same_except_o2o_knobs(const TrainerConfig& a, const TrainerConfig& b, std::string* first_difference = nullptr);

}  // namespace deflow
