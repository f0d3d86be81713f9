// Command-line front end over the deflow C API.
//
// Exit codes: 0 success, 1 runtime failure (bad data, numeric abort, I/O),
// 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "deflow/deflow.h"

using nlohmann::json;

namespace {

constexpr int kUsageError = 2;

struct Failure {
  int exit_code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw Failure{kUsageError, message}; }

void check(deflow_status status) {
  if (status != DEFLOW_OK) throw Failure{1, deflow_last_error()};
}

struct DatasetDeleter {
  void operator()(deflow_dataset* d) const { deflow_dataset_free(d); }
};
struct CheckpointDeleter {
  void operator()(deflow_checkpoint* c) const { deflow_checkpoint_free(c); }
};
using DatasetPtr = std::unique_ptr<deflow_dataset, DatasetDeleter>;
using CheckpointPtr = std::unique_ptr<deflow_checkpoint, CheckpointDeleter>;

std::string take_string(char* s) {
  std::string out(s);
  deflow_string_free(s);
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{1, "cannot open '" + path + "'"};
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Failure{1, "'" + path + "': " + e.what()};
  }
}

DatasetPtr load_dataset(const std::string& path) {
  deflow_dataset* d = nullptr;
  check(deflow_dataset_read(path.c_str(), &d));
  return DatasetPtr(d);
}

CheckpointPtr load_checkpoint(const std::string& path) {
  deflow_checkpoint* c = nullptr;
  check(deflow_checkpoint_read(path.c_str(), &c));
  return CheckpointPtr(c);
}

/// The "env" fragment of a config file, with an optional kind override.
json env_fragment(const std::string& config_path, const std::string& kind) {
  json env = json::object();
  if (!config_path.empty()) {
    const json cfg = read_json_file(config_path);
    if (cfg.contains("env")) env = cfg.at("env");
  }
  if (!kind.empty()) env["kind"] = kind;
  return env;
}

struct GenDataArgs {
  std::string env;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::int64_t n = 10000;
};

void run_gen_data(const GenDataArgs& a) {
  const std::string env = env_fragment(a.config, a.env).dump();
  if (a.n <= 0) throw Failure{1, "n must be positive"};
  deflow_dataset* raw = nullptr;
  check(deflow_dataset_generate(env.c_str(), static_cast<std::uint64_t>(a.n), a.seed, &raw));
  DatasetPtr data(raw);
  check(deflow_dataset_write(data.get(), a.out.c_str()));
  char* summary = nullptr;
  check(deflow_dataset_summary(data.get(), env.c_str(), &summary));
  std::cout << take_string(summary) << '\n';
}

struct IavArgs {
  std::string data;
  int k = 5;
};

void run_iav(const IavArgs& a) {
  DatasetPtr data = load_dataset(a.data);
  char* out = nullptr;
  check(deflow_iav(data.get(), a.k, &out));
  std::cout << take_string(out) << '\n';
}

struct TrainArgs {
  std::string config;
  std::string algo;
  std::string data;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool o2o = false;
  bool freeze_prior = false;
  std::string from;
};

void run_train(const TrainArgs& a) {
  if (a.o2o && a.from.empty()) usage_error("--o2o requires --from <offline checkpoint>");
  if (!a.o2o && a.freeze_prior) usage_error("--freeze-prior only applies with --o2o");
  if (!a.o2o && !a.from.empty()) usage_error("--from only applies with --o2o");
  json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  if (!cfg.is_object()) throw Failure{1, "config must be a JSON object"};
  if (!a.algo.empty()) cfg["algo"] = a.algo;
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.freeze_prior) cfg["freeze_prior"] = true;

  DatasetPtr data = load_dataset(a.data);
  CheckpointPtr from;
  if (a.o2o) from = load_checkpoint(a.from);
  const std::string text = cfg.dump();
  check(deflow_train(text.c_str(), data.get(), a.out_dir.c_str(), from.get(), nullptr));
  std::ifstream comps(a.out_dir + "/components.json");
  std::stringstream ss;
  ss << comps.rdbuf();
  std::cout << ss.str();
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  int episodes = 100;
  std::uint64_t seed = 0;
};

void run_eval(const EvalArgs& a) {
  CheckpointPtr ckpt = load_checkpoint(a.checkpoint);
  std::string env;
  if (!a.config.empty()) env = env_fragment(a.config, "").dump();
  char* out = nullptr;
  check(deflow_evaluate(ckpt.get(), env.empty() ? nullptr : env.c_str(), a.episodes, a.seed, &out));
  std::cout << take_string(out) << '\n';
}

struct LandscapeArgs {
  std::string checkpoint;
  std::string baseline;
  std::string out;
  int grid = 41;
  int samples = 200;
  std::uint64_t seed = 0;
};

void run_landscape(const LandscapeArgs& a) {
  CheckpointPtr ckpt = load_checkpoint(a.checkpoint);
  CheckpointPtr base;
  if (!a.baseline.empty()) base = load_checkpoint(a.baseline);
  char* out = nullptr;
  check(deflow_dump_landscape(ckpt.get(), base.get(), a.grid, a.samples, a.seed, &out));
  const std::string text = take_string(out);
  if (a.out.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
  if (!f) throw Failure{1, "cannot open '" + a.out + "' for writing"};
  f << text << '\n';
  if (!f) throw Failure{1, "write to '" + a.out + "' failed"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deflow: flow-prior policy learning with constrained refinement"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate an offline dataset");
  gen_cmd->add_option("--env", gen.env, "Environment kind")->check(CLI::IsMember({"bandit", "maze"}));
  gen_cmd->add_option("--config", gen.config, "Config file whose \"env\" section describes the environment");
  gen_cmd->add_option("--out", gen.out, "Output dataset path")->required();
  gen_cmd->add_option("--seed", gen.seed, "Root seed");
  gen_cmd->add_option("--n", gen.n, "Number of transitions");

  IavArgs iav;
  auto* iav_cmd = app.add_subcommand("iav", "Intrinsic action variance and derived trust-region budgets");
  iav_cmd->add_option("--data", iav.data, "Dataset path")->required();
  iav_cmd->add_option("--k", iav.k, "Number of nearest neighbours");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train offline, or fine-tune online with --o2o");
  train_cmd->add_option("--config", train.config, "JSON config file");
  train_cmd->add_option("--algo", train.algo, "Algorithm")->check(CLI::IsMember({"deflow", "bc", "onestep"}));
  train_cmd->add_option("--data", train.data, "Offline dataset path")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Existing output directory")->required();
  train_cmd->add_option("--seed", train.seed, "Root seed (overrides the config)");
  train_cmd->add_flag("--o2o", train.o2o, "Offline-to-online fine-tuning");
  train_cmd->add_flag("--freeze-prior", train.freeze_prior, "Keep the flow fixed during --o2o");
  train_cmd->add_option("--from", train.from, "Offline checkpoint to fine-tune");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("--config", ev.config, "Config file whose \"env\" section overrides the checkpoint's");
  eval_cmd->add_option("--episodes", ev.episodes, "Number of episodes");
  eval_cmd->add_option("--seed", ev.seed, "Evaluation seed");

  LandscapeArgs land;
  auto* land_cmd = app.add_subcommand("dump-landscape", "Export a Q grid and policy samples as JSON");
  land_cmd->add_option("--checkpoint", land.checkpoint, "Checkpoint path")->required();
  land_cmd->add_option("--baseline", land.baseline, "Optional baseline checkpoint");
  land_cmd->add_option("--out", land.out, "Output path (stdout when omitted)");
  land_cmd->add_option("--grid", land.grid, "Grid points per axis");
  land_cmd->add_option("--samples", land.samples, "Number of samples");
  land_cmd->add_option("--seed", land.seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (gen_cmd->parsed()) run_gen_data(gen);
    if (iav_cmd->parsed()) run_iav(iav);
    if (train_cmd->parsed()) run_train(train);
    if (eval_cmd->parsed()) run_eval(ev);
    if (land_cmd->parsed()) run_landscape(land);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.exit_code;
  }
  return 0;
}
