#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "baselines/onestep.hpp"
#include "critic/critic.hpp"
#include "data/transition_store.hpp"
#include "flow/flow_policy.hpp"
#include "lagrange/lagrange.hpp"
#include "refinement/refinement.hpp"
#include "trainer/config.hpp"
#include "trainer/evaluate.hpp"

namespace deflow {

/// Every trainable component of one run. Which members exist depends on the
/// algorithm: bc has only the flow; deflow adds refine, critic and the
/// multiplier; onestep adds the critic and the one-step policy.
struct Learner {
  TrainerConfig config;  // resolved: delta is always set for deflow
  int state_dim = 2;
  int action_dim = 2;
  std::optional<FlowPolicy> flow;
  std::optional<Mlp> refine;
  std::optional<CriticEnsemble> critic;
  std::optional<OneStepPolicy> onestep;
  LagrangeState lagrange;
  QNormState qnorm;

  /// Names of the instantiated components, in a fixed order.
  std::vector<std::string> components() const;
  /// Acting policy: composite for deflow, flow alone for bc, π(s, z) for onestep.
  std::unique_ptr<Policy> actor() const;
  double alpha() const;
};

/// Fresh components for a resolved config, initialized from the "init" stream.
Learner make_learner(const TrainerConfig& resolved, int state_dim, int action_dim);

/// Checkpoint document: {"config": ..., "flow": net, "refine": net, "q1", "q2",
/// "q1_target", "q2_target", "onestep": net, "lagrange": {"log_alpha", "delta"},
/// "qnorm": {...}}; keys for absent components are omitted.
nlohmann::json learner_to_checkpoint(const Learner& learner);
Learner learner_from_checkpoint(const nlohmann::json& doc);

/// Fills delta from the dataset's IAV when it is unset (deflow only needs it,
/// but the echo always carries the resolved value).
TrainerConfig resolve_config(TrainerConfig config, const TransitionStore& dataset);

struct MetricsRecord {
  std::int64_t iteration = 0;
  double flow_loss = 0.0;
  double critic_loss = 0.0;
  double refine_loss = 0.0;
  double alpha = 0.0;
  double mean_sq_residual = 0.0;
  double qnorm = 0.0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  std::int64_t online_env_steps = 0;
};

/// Fixed CSV schema; not-applicable columns (NaN) are written empty.
extern const char* const kMetricsHeader;
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRecord& rec);

struct AlphaTraceEntry {
  std::int64_t iteration = 0;
  double mean_sq_residual = 0.0;
  double delta = 0.0;
  double log_alpha_before = 0.0;
  double log_alpha_after = 0.0;
};

struct TrainOptions {
  /// Called with "critic", "flow", "refine", "onestep", "alpha" as each block runs.
  std::function<void(std::string_view)> on_block;
  /// Called as each metrics row is produced (used to stream the CSV).
  std::function<void(const MetricsRecord&)> on_metrics;
  /// Store parameter_hash(flow) after every iteration.
  bool record_flow_hashes = false;
};

struct TrainResult {
  Learner learner;
  std::vector<MetricsRecord> metrics;
  std::vector<AlphaTraceEntry> alpha_trace;
  std::vector<std::uint64_t> flow_hashes;
  std::int64_t iterations = 0;
  std::int64_t online_env_steps = 0;
  std::size_t online_buffer_size = 0;
  std::size_t online_buffer_peak = 0;
  /// Mean wall time of one update iteration (excluding evaluation).
  double seconds_per_iteration = 0.0;
  /// Wall time of every update iteration, in order.
  std::vector<double> iteration_seconds;
};

/// Offline training: per iteration one batch, then the critic, flow,
/// refinement and multiplier updates in that order (bc and onestep run the
/// subset that applies to them).
TrainResult train_offline(const TrainerConfig& config, const TransitionStore& dataset, const TrainOptions& options = {});

/// Offline-to-online fine-tuning from an offline checkpoint: one environment
/// step per iteration into a ring buffer, then a mixed offline/online batch
/// update. `config` must match the checkpoint's config except for the
/// online knobs. With freeze_prior the flow block is skipped entirely.
TrainResult train_o2o(const TrainerConfig& config, const TransitionStore& dataset, const nlohmann::json& checkpoint,
                      const TrainOptions& options = {});

/// Seed of the evaluation run at `iteration` (independent of training streams).
std::uint64_t eval_seed(std::uint64_t root_seed, std::int64_t iteration);

}  // namespace deflow
