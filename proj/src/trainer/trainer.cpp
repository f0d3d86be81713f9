#include "trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "common/error.hpp"
#include "data/dataset_file.hpp"
#include "data/iav.hpp"
#include "numerics/serialize.hpp"

namespace deflow {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_env_dims(int state_dim, int action_dim) {
  if (state_dim != 2 || action_dim != 2) {
    fail(ErrorCode::shape_mismatch, "environment expects state_dim 2 and action_dim 2, got state_dim " +
                                        std::to_string(state_dim) + " and action_dim " + std::to_string(action_dim));
  }
}

struct Optimizers {
  std::optional<AdamState> flow;
  std::optional<AdamState> refine;
  std::optional<AdamState> onestep;
  std::optional<CriticOptimizer> critic;
};

Optimizers make_optimizers(const Learner& l) {
  const TrainerConfig& c = l.config;
  auto with_lr = [](double lr) {
    AdamConfig a;
    a.lr = lr;
    return a;
  };
  Optimizers o;
  if (l.flow) o.flow = make_adam(l.flow->field(), with_lr(c.lr_flow));
  if (l.refine) o.refine = make_adam(*l.refine, with_lr(c.lr_refine));
  if (l.onestep) o.onestep = make_adam(l.onestep->net, with_lr(c.lr_onestep));
  if (l.critic) o.critic = make_critic_optimizer(*l.critic, with_lr(c.lr_critic));
  return o;
}

struct Streams {
  Rng batch;
  Rng critic;
  Rng flow;
  Rng refine;
  Rng onestep;

  Streams(std::uint64_t seed, const std::string& prefix)
      : batch(Rng::derive(seed, prefix + "batch")),
        critic(Rng::derive(seed, prefix + "critic-train")),
        flow(Rng::derive(seed, prefix + "flow-train")),
        refine(Rng::derive(seed, prefix + "refine-train")),
        onestep(Rng::derive(seed, prefix + "onestep-train")) {}
};

struct StepStats {
  double flow_loss = kNaN;
  double critic_loss = kNaN;
  double refine_loss = kNaN;
  double mean_sq_residual = kNaN;
  std::optional<AlphaTraceEntry> alpha;
};

/// Runs `body` as the named block of iteration `iter`, turning any numeric
/// failure into an abort message that names both.
template <typename F>
double run_block(std::int64_t iter, const char* component, const TrainOptions& options, F&& body) {
  if (options.on_block) options.on_block(component);
  double loss = 0.0;
  try {
    loss = body();
  } catch (const Error& e) {
    fail(e.code(), std::string("iteration ") + std::to_string(iter) + ": " + component + ": " + e.what());
  }
  if (!std::isfinite(loss)) {
    fail(ErrorCode::numeric, std::string("iteration ") + std::to_string(iter) + ": " + component +
                                 ": loss is not finite");
  }
  return loss;
}

double take_step(Mlp& net, AdamState& optim, Tape& tape, const Var& loss) {
  tape.backward(loss);
  adam_step(net, gradients_for(tape, net), optim);
  return loss.scalar();
}

/// One Algorithm-1 iteration on a fixed batch.
StepStats iterate(Learner& l, Optimizers& opt, Streams& rng, const Batch& batch, std::int64_t iter, bool update_flow,
                  const TrainOptions& options) {
  StepStats stats;
  const TrainerConfig& c = l.config;
  const auto rows = batch.size();

  if (l.critic) {
    stats.critic_loss = run_block(iter, "critic", options, [&] {
      Matrix next_actions;
      if (l.refine) {
        next_actions = compose_action(CompositePolicy{&*l.flow, &*l.refine}, batch.next_states, rng.critic).action;
      } else {
        const Matrix z = sample_standard_normal(rng.critic, rows, l.action_dim);
        next_actions = l.onestep->act(batch.next_states, z);
      }
      return critic_update(*l.critic, *opt.critic, batch, next_actions);
    });
  }

  if (update_flow) {
    stats.flow_loss = run_block(iter, "flow", options, [&] {
      Tape tape;
      const Var loss = flow_matching_loss(tape, *l.flow, batch.states, batch.actions, rng.flow);
      return take_step(l.flow->field(), *opt.flow, tape, loss);
    });
  }

  if (l.refine) {
    stats.refine_loss = run_block(iter, "refine", options, [&] {
      const Matrix base = sample_actions(*l.flow, batch.states, rng.refine);
      Tape tape;
      const RefinementForward fwd =
          refinement_forward(tape, *l.refine, q_head(l.critic->online[0], ParamUse::frozen), batch.states, base);
      l.qnorm = update_qnorm(l.qnorm, fwd.q.value());
      stats.mean_sq_residual = fwd.mean_sq_residual;
      const Var loss = refinement_loss(fwd, l.qnorm.running, current_alpha(l.lagrange));
      return take_step(*l.refine, *opt.refine, tape, loss);
    });

    if (c.alpha_mode == AlphaMode::adaptive) {
      run_block(iter, "alpha", options, [&] {
        AlphaTraceEntry e;
        e.iteration = iter;
        e.mean_sq_residual = stats.mean_sq_residual;
        e.delta = l.lagrange.delta;
        e.log_alpha_before = l.lagrange.log_alpha;
        l.lagrange = alpha_update(l.lagrange, stats.mean_sq_residual);
        e.log_alpha_after = l.lagrange.log_alpha;
        stats.alpha = e;
        return l.lagrange.log_alpha;
      });
    }
  }

  if (l.onestep) {
    stats.refine_loss = run_block(iter, "onestep", options, [&] {
      const Matrix z = sample_standard_normal(rng.onestep, rows, l.action_dim);
      Tape tape;
      const OneStepForward fwd = onestep_forward(tape, *l.onestep, *l.flow, batch.states, z);
      l.qnorm = update_qnorm(l.qnorm, q_values(l.critic->online[0], batch.states, fwd.action.value()));
      const Var loss = onestep_actor_loss(tape, fwd, q_head(l.critic->online[0], ParamUse::frozen), batch.states,
                                          l.qnorm.running, l.onestep->alpha_bc);
      return take_step(l.onestep->net, *opt.onestep, tape, loss);
    });
  }
  return stats;
}

/// Running sums of the per-iteration losses between two metrics rows.
struct IntervalMeans {
  double sums[4] = {0, 0, 0, 0};
  std::int64_t counts[4] = {0, 0, 0, 0};
  std::int64_t iterations = 0;

  void add(const StepStats& s) {
    const double v[4] = {s.flow_loss, s.critic_loss, s.refine_loss, s.mean_sq_residual};
    for (int i = 0; i < 4; ++i) {
      if (!std::isnan(v[i])) {
        sums[i] += v[i];
        ++counts[i];
      }
    }
    ++iterations;
  }
  double mean(int i) const { return counts[i] == 0 ? kNaN : sums[i] / static_cast<double>(counts[i]); }
};

MetricsRecord make_record(const Learner& l, const IntervalMeans& m, std::int64_t iteration, std::int64_t env_steps,
                          bool online) {
  MetricsRecord r;
  r.iteration = iteration;
  r.flow_loss = m.mean(0);
  r.critic_loss = m.mean(1);
  r.refine_loss = m.mean(2);
  r.mean_sq_residual = m.mean(3);
  r.alpha = l.refine ? l.alpha() : kNaN;
  r.qnorm = l.critic ? l.qnorm.running : kNaN;
  const EvalStats ev = evaluate(*l.actor(), l.config.env.make(), l.config.eval_episodes,
                                eval_seed(l.config.seed ^ (online ? 0x6f326fULL : 0ULL), iteration));
  r.eval_return_mean = ev.mean;
  r.eval_return_std = ev.std;
  r.online_env_steps = env_steps;
  return r;
}

void emit(TrainResult& result, const TrainOptions& options, MetricsRecord rec) {
  if (options.on_metrics) options.on_metrics(rec);
  result.metrics.push_back(rec);
}

void after_iteration(TrainResult& result, const TrainOptions& options, const StepStats& s) {
  if (s.alpha) result.alpha_trace.push_back(*s.alpha);
  if (options.record_flow_hashes && result.learner.flow) {
    result.flow_hashes.push_back(parameter_hash(result.learner.flow->field()));
  }
}

void require_dataset_matches(const TransitionStore& dataset) {
  require_env_dims(dataset.state_dim(), dataset.action_dim());
  if (dataset.empty()) fail(ErrorCode::invalid_argument, "dataset is empty");
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> Learner::components() const {
  std::vector<std::string> out;
  if (flow) out.emplace_back("flow");
  if (refine) out.emplace_back("refine");
  if (critic) out.emplace_back("critic");
  if (onestep) out.emplace_back("onestep");
  if (refine) out.emplace_back("lagrange");
  return out;
}

std::unique_ptr<Policy> Learner::actor() const {
  if (onestep) return std::make_unique<OneStepActor>(*onestep);
  require(flow.has_value(), "learner has no flow policy");
  return std::make_unique<CompositeActor>(CompositePolicy{&*flow, refine ? &*refine : nullptr});
}

double Learner::alpha() const { return current_alpha(lagrange); }

Learner make_learner(const TrainerConfig& resolved, int state_dim, int action_dim) {
  resolved.validate();
  Learner l;
  l.config = resolved;
  l.state_dim = state_dim;
  l.action_dim = action_dim;
  const TrainerConfig& c = resolved;
  // Each component draws from its own stream, so e.g. the flow starts from the
  // same weights whichever algorithm is selected.
  Rng flow_rng = Rng::derive(c.seed, "init-flow");
  l.flow = FlowPolicy::create(state_dim, action_dim, c.hidden, c.activation, c.flow_steps, flow_rng);
  if (c.algo == Algo::bc) return l;

  Rng critic_rng = Rng::derive(c.seed, "init-critic");
  l.critic = CriticEnsemble::create(state_dim, action_dim, c.hidden, c.activation, c.tau, c.gamma, critic_rng);
  if (c.algo == Algo::deflow) {
    require(c.delta.has_value(), "deflow needs a resolved delta");
    Rng refine_rng = Rng::derive(c.seed, "init-refine");
    l.refine = make_refinement_net(state_dim, action_dim, c.hidden, c.activation, refine_rng);
    l.lagrange = make_lagrange(*c.delta, c.lr_alpha, c.initial_alpha);
  } else {
    Rng onestep_rng = Rng::derive(c.seed, "init-onestep");
    l.onestep = OneStepPolicy::create(state_dim, action_dim, c.hidden, c.activation, c.alpha_bc, onestep_rng);
  }
  return l;
}

json learner_to_checkpoint(const Learner& l) {
  json doc;
  doc["config"] = config_to_json(l.config);
  if (l.flow) doc["flow"] = mlp_to_json(l.flow->field());
  if (l.refine) doc["refine"] = mlp_to_json(*l.refine);
  if (l.critic) {
    doc["q1"] = mlp_to_json(l.critic->online[0]);
    doc["q2"] = mlp_to_json(l.critic->online[1]);
    doc["q1_target"] = mlp_to_json(l.critic->target[0]);
    doc["q2_target"] = mlp_to_json(l.critic->target[1]);
  }
  if (l.onestep) doc["onestep"] = mlp_to_json(l.onestep->net);
  if (l.refine) doc["lagrange"] = {{"log_alpha", l.lagrange.log_alpha}, {"delta", l.lagrange.delta}};
  if (l.critic) doc["qnorm"] = {{"running", l.qnorm.running}, {"initialized", l.qnorm.initialized}};
  return doc;
}

Learner learner_from_checkpoint(const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::parse, "checkpoint: expected a JSON object");
  auto need = [&](const char* key) -> const json& {
    auto it = doc.find(key);
    if (it == doc.end()) fail(ErrorCode::parse, std::string("checkpoint: missing key '") + key + "'");
    return *it;
  };
  Learner l;
  l.config = config_from_json(need("config"));
  const TrainerConfig& c = l.config;
  Mlp field = mlp_from_json(need("flow"));
  l.action_dim = field.output_dim();
  l.state_dim = field.input_dim() - 1 - l.action_dim;
  if (l.state_dim < 1) fail(ErrorCode::shape_mismatch, "checkpoint: flow input width is too small");
  l.flow = FlowPolicy(std::move(field), l.state_dim, l.action_dim, c.flow_steps);
  if (c.algo == Algo::bc) return l;

  CriticEnsemble critic;
  critic.online = {mlp_from_json(need("q1")), mlp_from_json(need("q2"))};
  critic.target = {mlp_from_json(need("q1_target")), mlp_from_json(need("q2_target"))};
  critic.tau = c.tau;
  critic.gamma = c.gamma;
  for (const Mlp& head : critic.online) {
    if (head.input_dim() != l.state_dim + l.action_dim || head.output_dim() != 1) {
      fail(ErrorCode::shape_mismatch, "checkpoint: critic heads do not match the flow's dimensions");
    }
  }
  critic.check();
  l.critic = std::move(critic);
  try {
    const json& qn = need("qnorm");
    l.qnorm.running = qn.at("running").get<double>();
    l.qnorm.initialized = qn.at("initialized").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("checkpoint.qnorm: ") + e.what());
  }

  if (c.algo == Algo::deflow) {
    Mlp refine = mlp_from_json(need("refine"));
    check_refinement_net(refine, l.state_dim, l.action_dim);
    l.refine = std::move(refine);
    try {
      const json& lg = need("lagrange");
      l.lagrange.log_alpha = lg.at("log_alpha").get<double>();
      l.lagrange.delta = lg.at("delta").get<double>();
    } catch (const json::exception& e) {
      fail(ErrorCode::parse, std::string("checkpoint.lagrange: ") + e.what());
    }
    l.lagrange.lr_alpha = c.lr_alpha;
    require(l.lagrange.delta > 0.0, "checkpoint.lagrange: delta must be positive");
  } else {
    OneStepPolicy p;
    p.net = mlp_from_json(need("onestep"));
    p.alpha_bc = c.alpha_bc;
    if (p.net.input_dim() != l.state_dim + l.action_dim || p.net.output_dim() != l.action_dim) {
      fail(ErrorCode::shape_mismatch, "checkpoint: one-step policy does not match the flow's dimensions");
    }
    l.onestep = std::move(p);
  }
  return l;
}

TrainerConfig resolve_config(TrainerConfig config, const TransitionStore& dataset) {
  config.validate();
  if (config.algo == Algo::deflow && !config.delta) {
    const double iav = compute_iav(dataset, config.iav_k).iav;
    const double delta = delta_from_iav(iav, config.task_class);
    if (!(delta > 0.0)) {
      fail(ErrorCode::invalid_argument, "cannot derive delta: dataset action variance is zero; set delta explicitly");
    }
    config.delta = delta;
  }
  return config;
}

// ---------------------------------------------------------------------------

const char* const kMetricsHeader =
    "iter,flow_loss,critic_loss,refine_loss,alpha,mean_sq_residual,qnorm,eval_return_mean,eval_return_std,"
    "online_env_steps";

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const MetricsRecord& r) {
  auto cell = [&](double v) {
    out << ',';
    if (std::isfinite(v)) out << format_double(v);
  };
  out << r.iteration;
  cell(r.flow_loss);
  cell(r.critic_loss);
  cell(r.refine_loss);
  cell(r.alpha);
  cell(r.mean_sq_residual);
  cell(r.qnorm);
  cell(r.eval_return_mean);
  cell(r.eval_return_std);
  out << ',' << r.online_env_steps << '\n';
  out.flush();
}

std::uint64_t eval_seed(std::uint64_t root_seed, std::int64_t iteration) {
  return Rng::derive(root_seed, "eval").split(static_cast<std::uint64_t>(iteration)).seed();
}

// ---------------------------------------------------------------------------

TrainResult train_offline(const TrainerConfig& config, const TransitionStore& dataset, const TrainOptions& options) {
  require_dataset_matches(dataset);
  const TrainerConfig resolved = resolve_config(config, dataset);
  TrainResult result;
  result.learner = make_learner(resolved, dataset.state_dim(), dataset.action_dim());
  Learner& l = result.learner;
  Optimizers opt = make_optimizers(l);
  Streams rng(resolved.seed, "");

  IntervalMeans interval;
  double seconds = 0.0;
  for (std::int64_t i = 0; i < resolved.offline_steps; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const Batch batch = sample_batch(dataset, static_cast<std::size_t>(resolved.batch_size), rng.batch);
    const StepStats s = iterate(l, opt, rng, batch, i + 1, true, options);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    seconds += dt;
    result.iteration_seconds.push_back(dt);
    interval.add(s);
    after_iteration(result, options, s);
    const std::int64_t done = i + 1;
    if (done % resolved.eval_every == 0 || done == resolved.offline_steps) {
      emit(result, options, make_record(l, interval, done, 0, false));
      interval = IntervalMeans{};
    }
  }
  result.iterations = resolved.offline_steps;
  result.seconds_per_iteration = result.iterations > 0 ? seconds / static_cast<double>(result.iterations) : 0.0;
  return result;
}

TrainResult train_o2o(const TrainerConfig& config, const TransitionStore& dataset, const json& checkpoint,
                      const TrainOptions& options) {
  require_dataset_matches(dataset);
  TrainResult result;
  result.learner = learner_from_checkpoint(checkpoint);
  Learner& l = result.learner;
  require_env_dims(l.state_dim, l.action_dim);

  TrainerConfig resolved = config;
  if (resolved.algo == Algo::deflow && !resolved.delta) resolved.delta = l.config.delta;
  resolved.validate();
  std::string diff;
  if (!same_except_o2o_knobs(resolved, l.config, &diff)) {
    fail(ErrorCode::invalid_argument,
         "online config differs from the offline checkpoint's config in '" + diff + "'; only online knobs may change");
  }
  l.config = resolved;
  if (l.critic) {
    l.critic->tau = resolved.tau;
    l.critic->gamma = resolved.gamma;
  }

  Optimizers opt = make_optimizers(l);
  Streams rng(resolved.seed, "online-");
  Rng act_rng = Rng::derive(resolved.seed, "online-act");
  const Environment env = resolved.env.make();
  TransitionStore online(l.state_dim, l.action_dim, static_cast<std::size_t>(resolved.online_capacity));

  Vec2 state = env.initial_state();
  int episode_t = 0;
  IntervalMeans interval;
  double seconds = 0.0;
  std::int64_t updates = 0;
  for (std::int64_t i = 0; i < resolved.online_steps; ++i) {
    const auto start = std::chrono::steady_clock::now();
    Matrix s(1, 2);
    s << state.x, state.y;
    const auto actor = l.actor();
    const Matrix z = sample_standard_normal(act_rng, 1, actor->noise_dim());
    const Matrix a = actor->act(s, z);
    const EnvStep step = env.step(state, {a(0, 0), a(0, 1)});
    ++episode_t;
    online.push(Transition{{state.x, state.y},
                           {a(0, 0), a(0, 1)},
                           step.reward,
                           {step.next_state.x, step.next_state.y},
                           step.terminal});
    result.online_buffer_peak = std::max(result.online_buffer_peak, online.size());
    state = step.next_state;
    if (step.terminal || episode_t >= env.horizon()) {
      state = env.initial_state();
      episode_t = 0;
    }

    const std::int64_t done = i + 1;
    if (i >= resolved.online_warmup) {
      const Batch batch = sample_batch(dataset, static_cast<std::size_t>(resolved.batch_size), rng.batch, &online,
                                       resolved.mix_ratio);
      const StepStats st = iterate(l, opt, rng, batch, done, !resolved.freeze_prior, options);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      seconds += dt;
      result.iteration_seconds.push_back(dt);
      ++updates;
      interval.add(st);
      after_iteration(result, options, st);
    }
    if (done % resolved.eval_every == 0 || done == resolved.online_steps) {
      emit(result, options, make_record(l, interval, done, done, true));
      interval = IntervalMeans{};
    }
  }
  result.iterations = updates;
  result.online_env_steps = resolved.online_steps;
  result.online_buffer_size = online.size();
  result.seconds_per_iteration = updates > 0 ? seconds / static_cast<double>(updates) : 0.0;
  return result;
}

}  // namespace deflow
