#include "deflow/deflow.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "data/dataset_file.hpp"
#include "data/iav.hpp"
#include "envs/envs.hpp"
#include "trainer/landscape.hpp"
#include "trainer/trainer.hpp"

using nlohmann::json;

struct deflow_dataset {
  deflow::TransitionStore store;
};

struct deflow_checkpoint {
  json doc;
  deflow::Learner learner;
};

namespace {

thread_local std::string g_last_error;

deflow_status status_for(deflow::ErrorCode code) {
  switch (code) {
    case deflow::ErrorCode::invalid_argument:
      return DEFLOW_ERR_INVALID_ARGUMENT;
    case deflow::ErrorCode::shape_mismatch:
      return DEFLOW_ERR_SHAPE_MISMATCH;
    case deflow::ErrorCode::io:
      return DEFLOW_ERR_IO;
    case deflow::ErrorCode::parse:
      return DEFLOW_ERR_PARSE;
    case deflow::ErrorCode::numeric:
      return DEFLOW_ERR_NUMERIC;
  }
  return DEFLOW_ERR_INTERNAL;
}

template <typename F>
deflow_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return DEFLOW_OK;
  } catch (const deflow::Error& e) {
    g_last_error = e.what();
    return status_for(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return DEFLOW_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DEFLOW_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DEFLOW_ERR_INTERNAL;
  }
}

void require_ptr(const void* p, const char* what) {
  if (p == nullptr) deflow::fail(deflow::ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    deflow::fail(deflow::ErrorCode::parse, std::string(what) + ": " + e.what());
  }
}

deflow::EnvSpec env_spec(const char* env_json) {
  if (env_json == nullptr) return deflow::EnvSpec{};
  deflow::EnvSpec spec = deflow::env_from_json(parse_json(env_json, "environment"));
  (void)spec.make();
  return spec;
}

std::string dump(const json& doc) { return doc.dump(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) deflow::fail(deflow::ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) deflow::fail(deflow::ErrorCode::io, "write to '" + path.string() + "' failed");
}

deflow_checkpoint* make_checkpoint(json doc) {
  auto* c = new deflow_checkpoint{std::move(doc), {}};
  try {
    c->learner = deflow::learner_from_checkpoint(c->doc);
  } catch (...) {
    delete c;
    throw;
  }
  return c;
}

}  // namespace

extern "C" {

const char* deflow_version(void) { return "1.0.0"; }

const char* deflow_last_error(void) { return g_last_error.c_str(); }

void deflow_string_free(char* s) { std::free(s); }

deflow_status deflow_dataset_generate(const char* env_json, uint64_t n, uint64_t seed, deflow_dataset** out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = nullptr;
    if (n == 0) deflow::fail(deflow::ErrorCode::invalid_argument, "n must be positive");
    const deflow::EnvSpec spec = env_spec(env_json);
    deflow::Rng rng = deflow::Rng::derive(seed, "data");
    deflow::TransitionStore store =
        deflow::generate_dataset(spec.make(), static_cast<std::size_t>(n), spec.noise_scale(), rng);
    *out = new deflow_dataset{std::move(store)};
  });
}

deflow_status deflow_dataset_read(const char* path, deflow_dataset** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = nullptr;
    *out = new deflow_dataset{deflow::read_dataset(std::string(path))};
  });
}

deflow_status deflow_dataset_write(const deflow_dataset* dataset, const char* path) {
  return guarded([&] {
    require_ptr(dataset, "dataset");
    require_ptr(path, "path");
    deflow::write_dataset(dataset->store, std::string(path));
  });
}

size_t deflow_dataset_size(const deflow_dataset* dataset) { return dataset == nullptr ? 0 : dataset->store.size(); }

deflow_status deflow_dataset_summary(const deflow_dataset* dataset, const char* env_json, char** out_json) {
  return guarded([&] {
    require_ptr(dataset, "dataset");
    require_ptr(out_json, "out_json");
    *out_json = nullptr;
    const deflow::EnvSpec spec = env_spec(env_json);
    const deflow::TransitionStore& s = dataset->store;
    double reward = 0.0;
    std::size_t terminals = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      reward += s.at(i).reward;
      if (s.at(i).terminal) ++terminals;
    }
    json doc{{"env", spec.is_bandit ? "bandit" : "maze"},
             {"n", s.size()},
             {"state_dim", s.state_dim()},
             {"action_dim", s.action_dim()},
             {"terminals", terminals},
             {"mean_reward", s.empty() ? 0.0 : reward / static_cast<double>(s.size())}};
    if (spec.is_bandit && s.action_dim() == 2) {
      const deflow::MultimodalBandit bandit(spec.bandit);
      std::vector<std::size_t> counts(spec.bandit.mode_centers.size(), 0);
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& a = s.at(i).action;
        ++counts[bandit.nearest_mode({a[0], a[1]})];
      }
      json shares = json::array();
      for (std::size_t c : counts) shares.push_back(s.empty() ? 0.0 : static_cast<double>(c) / s.size());
      doc["mode_shares"] = shares;
    }
    *out_json = copy_out(dump(doc));
  });
}

void deflow_dataset_free(deflow_dataset* dataset) { delete dataset; }

deflow_status deflow_iav(const deflow_dataset* dataset, int k, char** out_json) {
  return guarded([&] {
    require_ptr(dataset, "dataset");
    require_ptr(out_json, "out_json");
    *out_json = nullptr;
    const deflow::IavEstimate est = deflow::compute_iav(dataset->store, k);
    const json doc{{"k", k},
                   {"iav", est.iav},
                   {"delta_fine", deflow::delta_from_iav(est.iav, deflow::TaskClass::fine_manipulation)},
                   {"delta_nav", deflow::delta_from_iav(est.iav, deflow::TaskClass::navigation)}};
    *out_json = copy_out(dump(doc));
  });
}

deflow_status deflow_train(const char* config_json, const deflow_dataset* dataset, const char* out_dir,
                           const deflow_checkpoint* from, deflow_checkpoint** out) {
  return guarded([&] {
    require_ptr(config_json, "config_json");
    require_ptr(dataset, "dataset");
    require_ptr(out_dir, "out_dir");
    if (out != nullptr) *out = nullptr;
    const std::filesystem::path dir(out_dir);
    if (!std::filesystem::is_directory(dir)) {
      deflow::fail(deflow::ErrorCode::io, "output directory '" + dir.string() + "' does not exist");
    }

    deflow::TrainerConfig config = deflow::config_from_json(parse_json(config_json, "config"));
    if (from == nullptr) {
      config = deflow::resolve_config(config, dataset->store);
    } else if (config.algo == deflow::Algo::deflow && !config.delta) {
      config.delta = from->learner.config.delta;
    }
    write_text(dir / "config.json", deflow::config_to_json(config).dump(2) + "\n");

    std::ofstream metrics(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics) deflow::fail(deflow::ErrorCode::io, "cannot open metrics.csv in '" + dir.string() + "'");
    deflow::write_metrics_header(metrics);
    deflow::TrainOptions options;
    options.on_metrics = [&](const deflow::MetricsRecord& r) { deflow::write_metrics_row(metrics, r); };

    deflow::TrainResult result = from == nullptr
                                     ? deflow::train_offline(config, dataset->store, options)
                                     : deflow::train_o2o(config, dataset->store, from->doc, options);
    json components = result.learner.components();
    write_text(dir / "components.json", json{{"components", components}}.dump() + "\n");
    json doc = deflow::learner_to_checkpoint(result.learner);
    write_text(dir / "checkpoint.json", doc.dump() + "\n");
    if (out != nullptr) *out = new deflow_checkpoint{std::move(doc), std::move(result.learner)};
  });
}

deflow_status deflow_checkpoint_read(const char* path, deflow_checkpoint** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = nullptr;
    std::ifstream in(path, std::ios::binary);
    if (!in) deflow::fail(deflow::ErrorCode::io, std::string("cannot open '") + path + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      deflow::fail(deflow::ErrorCode::parse, std::string("checkpoint '") + path + "': " + e.what());
    }
    *out = make_checkpoint(std::move(doc));
  });
}

deflow_status deflow_checkpoint_write(const deflow_checkpoint* checkpoint, const char* path) {
  return guarded([&] {
    require_ptr(checkpoint, "checkpoint");
    require_ptr(path, "path");
    write_text(path, deflow::learner_to_checkpoint(checkpoint->learner).dump() + "\n");
  });
}

deflow_status deflow_checkpoint_to_json(const deflow_checkpoint* checkpoint, char** out_json) {
  return guarded([&] {
    require_ptr(checkpoint, "checkpoint");
    require_ptr(out_json, "out_json");
    *out_json = copy_out(deflow::learner_to_checkpoint(checkpoint->learner).dump());
  });
}

void deflow_checkpoint_free(deflow_checkpoint* checkpoint) { delete checkpoint; }

deflow_status deflow_evaluate(const deflow_checkpoint* checkpoint, const char* env_json, int episodes, uint64_t seed,
                              char** out_json) {
  return guarded([&] {
    require_ptr(checkpoint, "checkpoint");
    require_ptr(out_json, "out_json");
    *out_json = nullptr;
    const deflow::Learner& l = checkpoint->learner;
    const deflow::EnvSpec spec = env_json == nullptr ? l.config.env : env_spec(env_json);
    if (l.state_dim != 2 || l.action_dim != 2) {
      deflow::fail(deflow::ErrorCode::shape_mismatch,
                   "checkpoint dimensions (state " + std::to_string(l.state_dim) + ", action " +
                       std::to_string(l.action_dim) + ") do not match the environment (state 2, action 2)");
    }
    const deflow::EvalStats st = deflow::evaluate(*l.actor(), spec.make(), episodes, seed);
    const json doc{{"mean", st.mean}, {"std", st.std}, {"episodes", episodes}, {"per_episode", st.per_episode}};
    *out_json = copy_out(dump(doc));
  });
}

deflow_status deflow_dump_landscape(const deflow_checkpoint* checkpoint, const deflow_checkpoint* baseline, int grid,
                                    int samples, uint64_t seed, char** out_json) {
  return guarded([&] {
    require_ptr(checkpoint, "checkpoint");
    require_ptr(out_json, "out_json");
    *out_json = nullptr;
    deflow::LandscapeOptions opt;
    opt.grid = grid;
    opt.samples = samples;
    opt.seed = seed;
    const json doc = deflow::dump_landscape(checkpoint->learner, opt, baseline ? &baseline->learner : nullptr);
    *out_json = copy_out(dump(doc));
  });
}

}  // extern "C"
