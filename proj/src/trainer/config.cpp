#include "trainer/config.hpp"

#include <set>

#include "common/error.hpp"

namespace deflow {

using nlohmann::json;

std::string to_string(Algo a) {
  switch (a) {
    case Algo::deflow:
      return "deflow";
    case Algo::bc:
      return "bc";
    case Algo::onestep:
      return "onestep";
  }
  return "deflow";
}

Algo algo_from_string(const std::string& name) {
  if (name == "deflow") return Algo::deflow;
  if (name == "bc") return Algo::bc;
  if (name == "onestep") return Algo::onestep;
  fail(ErrorCode::invalid_argument, "unknown algo '" + name + "' (expected deflow, bc or onestep)");
}

Environment EnvSpec::make() const {
  return is_bandit ? Environment(MultimodalBandit(bandit)) : Environment(PointMaze(maze));
}

namespace {

/// Reads keys out of one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) fail(ErrorCode::parse, where_ + ": expected a JSON object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception& e) {
        fail(ErrorCode::parse, where_ + "." + key + ": " + e.what());
      }
    }
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorCode::parse, where_ + ": unknown key '" + it.key() + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

Vec2 vec2_from(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(ErrorCode::parse, where + ": expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

json vec2_to(Vec2 v) { return json::array({v.x, v.y}); }

BanditConfig bandit_from_json(const json& doc) {
  BanditConfig c;
  ObjectReader r(doc, "env.bandit");
  if (const json* v = r.get("mode_centers")) {
    if (!v->is_array()) fail(ErrorCode::parse, "env.bandit.mode_centers: expected a list of [x, y]");
    c.mode_centers.clear();
    for (const json& p : *v) c.mode_centers.push_back(vec2_from(p, "env.bandit.mode_centers"));
  }
  r.read("mode_rewards", c.mode_rewards);
  r.read("reward_bandwidth", c.reward_bandwidth);
  r.read("noise_scale", c.noise_scale);
  if (const json* v = r.get("context")) c.context = vec2_from(*v, "env.bandit.context");
  r.finish();
  return c;
}

MazeConfig maze_from_json(const json& doc) {
  MazeConfig c;
  ObjectReader r(doc, "env.maze");
  if (const json* v = r.get("start")) c.start = vec2_from(*v, "env.maze.start");
  if (const json* v = r.get("goal")) c.goal = vec2_from(*v, "env.maze.goal");
  r.read("goal_radius", c.goal_radius);
  if (const json* v = r.get("walls")) {
    if (!v->is_array()) fail(ErrorCode::parse, "env.maze.walls: expected a list of segments");
    c.walls.clear();
    for (const json& s : *v) {
      if (!s.is_array() || s.size() != 2) fail(ErrorCode::parse, "env.maze.walls: segment must be [[ax, ay], [bx, by]]");
      c.walls.push_back({vec2_from(s[0], "env.maze.walls"), vec2_from(s[1], "env.maze.walls")});
    }
  }
  r.read("dt", c.dt);
  r.read("max_steps", c.max_steps);
  r.read("noise_scale", c.noise_scale);
  r.read("dense_reward", c.dense_reward);
  r.finish();
  return c;
}

}  // namespace

EnvSpec env_from_json(const json& doc) {
  EnvSpec spec;
  ObjectReader r(doc, "env");
  std::string kind = "bandit";
  r.read("kind", kind);
  if (kind != "bandit" && kind != "maze") fail(ErrorCode::parse, "env.kind: expected 'bandit' or 'maze'");
  spec.is_bandit = kind == "bandit";
  if (const json* v = r.get("bandit")) spec.bandit = bandit_from_json(*v);
  if (const json* v = r.get("maze")) spec.maze = maze_from_json(*v);
  r.finish();
  return spec;
}

json env_to_json(const EnvSpec& env) {
  json centers = json::array();
  for (Vec2 c : env.bandit.mode_centers) centers.push_back(vec2_to(c));
  json walls = json::array();
  for (const Segment& s : env.maze.walls) walls.push_back(json::array({vec2_to(s.a), vec2_to(s.b)}));
  return json{
      {"kind", env.is_bandit ? "bandit" : "maze"},
      {"bandit",
       {{"mode_centers", centers},
        {"mode_rewards", env.bandit.mode_rewards},
        {"reward_bandwidth", env.bandit.reward_bandwidth},
        {"noise_scale", env.bandit.noise_scale},
        {"context", vec2_to(env.bandit.context)}}},
      {"maze",
       {{"start", vec2_to(env.maze.start)},
        {"goal", vec2_to(env.maze.goal)},
        {"goal_radius", env.maze.goal_radius},
        {"walls", walls},
        {"dt", env.maze.dt},
        {"max_steps", env.maze.max_steps},
        {"noise_scale", env.maze.noise_scale},
        {"dense_reward", env.maze.dense_reward}}},
  };
}

TrainerConfig config_from_json(const json& doc) {
  TrainerConfig c;
  ObjectReader r(doc, "config");
  if (const json* v = r.get("env")) c.env = env_from_json(*v);
  if (const json* v = r.get("algo")) c.algo = algo_from_string(v->get<std::string>());
  r.read("offline_steps", c.offline_steps);
  r.read("online_steps", c.online_steps);
  r.read("batch_size", c.batch_size);
  r.read("gamma", c.gamma);
  r.read("tau", c.tau);
  r.read("lr_flow", c.lr_flow);
  r.read("lr_refine", c.lr_refine);
  r.read("lr_critic", c.lr_critic);
  r.read("lr_onestep", c.lr_onestep);
  r.read("lr_alpha", c.lr_alpha);
  r.read("flow_steps", c.flow_steps);
  r.read("hidden", c.hidden);
  if (const json* v = r.get("activation")) c.activation = activation_from_string(v->get<std::string>());
  if (const json* v = r.get("delta")) {
    if (v->is_null()) {
      c.delta.reset();
    } else if (v->is_number()) {
      c.delta = v->get<double>();
    } else {
      fail(ErrorCode::parse, "config.delta: expected a number or null");
    }
  }
  if (const json* v = r.get("task_class")) c.task_class = task_class_from_string(v->get<std::string>());
  r.read("iav_k", c.iav_k);
  if (const json* v = r.get("alpha_mode")) {
    const auto m = v->get<std::string>();
    if (m != "adaptive" && m != "fixed") fail(ErrorCode::parse, "config.alpha_mode: expected 'adaptive' or 'fixed'");
    c.alpha_mode = m == "adaptive" ? AlphaMode::adaptive : AlphaMode::fixed;
  }
  r.read("initial_alpha", c.initial_alpha);
  r.read("alpha_bc", c.alpha_bc);
  r.read("freeze_prior", c.freeze_prior);
  r.read("mix_ratio", c.mix_ratio);
  r.read("online_capacity", c.online_capacity);
  r.read("online_warmup", c.online_warmup);
  r.read("eval_every", c.eval_every);
  r.read("eval_episodes", c.eval_episodes);
  r.read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

json config_to_json(const TrainerConfig& c) {
  return json{
      {"env", env_to_json(c.env)},
      {"algo", to_string(c.algo)},
      {"offline_steps", c.offline_steps},
      {"online_steps", c.online_steps},
      {"batch_size", c.batch_size},
      {"gamma", c.gamma},
      {"tau", c.tau},
      {"lr_flow", c.lr_flow},
      {"lr_refine", c.lr_refine},
      {"lr_critic", c.lr_critic},
      {"lr_onestep", c.lr_onestep},
      {"lr_alpha", c.lr_alpha},
      {"flow_steps", c.flow_steps},
      {"hidden", c.hidden},
      {"activation", to_string(c.activation)},
      {"delta", c.delta ? json(*c.delta) : json(nullptr)},
      {"task_class", to_string(c.task_class)},
      {"iav_k", c.iav_k},
      {"alpha_mode", c.alpha_mode == AlphaMode::adaptive ? "adaptive" : "fixed"},
      {"initial_alpha", c.initial_alpha},
      {"alpha_bc", c.alpha_bc},
      {"freeze_prior", c.freeze_prior},
      {"mix_ratio", c.mix_ratio},
      {"online_capacity", c.online_capacity},
      {"online_warmup", c.online_warmup},
      {"eval_every", c.eval_every},
      {"eval_episodes", c.eval_episodes},
      {"seed", c.seed},
  };
}

void TrainerConfig::validate() const {
  require(offline_steps >= 0 && online_steps >= 0, "config: step budgets must be non-negative");
  require(batch_size > 0, "config: batch_size must be positive");
  require(gamma >= 0.0 && gamma < 1.0, "config: gamma must lie in [0, 1)");
  require(tau > 0.0 && tau <= 1.0, "config: tau must lie in (0, 1]");
  require(lr_flow > 0.0 && lr_refine > 0.0 && lr_critic > 0.0 && lr_onestep > 0.0 && lr_alpha > 0.0,
          "config: all learning rates must be positive");
  require(flow_steps >= 1, "config: flow_steps must be at least 1");
  for (int h : hidden) require(h > 0, "config: hidden widths must be positive");
  require(!delta || *delta > 0.0, "config: delta must be positive");
  require(iav_k >= 1, "config: iav_k must be at least 1");
  require(initial_alpha > 0.0, "config: initial_alpha must be positive");
  require(alpha_bc > 0.0, "config: alpha_bc must be positive");
  require(mix_ratio >= 0.0 && mix_ratio <= 1.0, "config: mix_ratio must lie in [0, 1]");
  require(online_capacity > 0, "config: online_capacity must be positive");
  require(online_warmup >= 0, "config: online_warmup must be non-negative");
  require(eval_every > 0, "config: eval_every must be positive");
  require(eval_episodes >= 1, "config: eval_episodes must be at least 1");
  // Constructing the environment runs its own invariant checks.
  (void)env.make();
}

bool same_except_o2o_knobs(const TrainerConfig& a, const TrainerConfig& b, std::string* first_difference) {
  static const std::set<std::string> exempt{"online_steps", "offline_steps", "freeze_prior", "mix_ratio",
                                            "online_capacity", "online_warmup", "seed", "eval_every",
                                            "eval_episodes"};
  const json ja = config_to_json(a);
  const json jb = config_to_json(b);
  for (auto it = ja.begin(); it != ja.end(); ++it) {
    if (exempt.count(it.key())) continue;
    if (jb.at(it.key()) != it.value()) {
      if (first_difference != nullptr) *first_difference = it.key();
      return false;
    }
  }
  return true;
}

}  // namespace deflow
