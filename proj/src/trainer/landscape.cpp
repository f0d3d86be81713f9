#include "trainer/landscape.hpp"

#include "common/error.hpp"

namespace deflow {

using nlohmann::json;

namespace {

json pair(const Matrix& m, Eigen::Index r) { return json::array({m(r, 0), m(r, 1)}); }

}  // namespace

json dump_landscape(const Learner& learner, const LandscapeOptions& options, const Learner* baseline) {
  require(options.grid >= 2, "dump-landscape: grid must be at least 2");
  require(options.samples >= 1, "dump-landscape: samples must be at least 1");
  if (!learner.critic) fail(ErrorCode::invalid_argument, "dump-landscape: checkpoint has no critic");
  require(learner.state_dim == 2 && learner.action_dim == 2, "dump-landscape: expects 2-D states and actions");

  const Vec2 state = learner.config.env.make().initial_state();
  const int n = options.grid;
  std::vector<double> axis(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) axis[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / (n - 1);

  Matrix states(static_cast<Eigen::Index>(n) * n, 2);
  Matrix actions(states.rows(), 2);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Index r = static_cast<Eigen::Index>(j) * n + i;
      states(r, 0) = state.x;
      states(r, 1) = state.y;
      actions(r, 0) = axis[static_cast<std::size_t>(i)];
      actions(r, 1) = axis[static_cast<std::size_t>(j)];
    }
  }
  const Matrix q = q_values(learner.critic->online[0], states, actions);
  json qrows = json::array();
  for (int j = 0; j < n; ++j) {
    json row = json::array();
    for (int i = 0; i < n; ++i) row.push_back(q(static_cast<Eigen::Index>(j) * n + i, 0));
    qrows.push_back(std::move(row));
  }

  Rng rng = Rng::derive(options.seed, "landscape");
  Matrix s(options.samples, 2);
  s.col(0).setConstant(state.x);
  s.col(1).setConstant(state.y);
  const Matrix z = sample_standard_normal(rng, options.samples, learner.action_dim);

  json samples = json::array();
  if (learner.flow && !learner.onestep) {
    const ComposedAction c =
        compose_action(CompositePolicy{&*learner.flow, learner.refine ? &*learner.refine : nullptr}, s, z);
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      samples.push_back({{"base", pair(c.base, r)}, {"delta", pair(c.delta, r)}, {"action", pair(c.action, r)}});
    }
  } else {
    // One-step policy: the flow answer for the same noise is its proposal.
    const Matrix base = euler_sample(*learner.flow, s, z);
    const Matrix a = learner.onestep->act(s, z);
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      samples.push_back({{"base", pair(base, r)},
                         {"delta", json::array({a(r, 0) - base(r, 0), a(r, 1) - base(r, 1)})},
                         {"action", pair(a, r)}});
    }
  }

  json doc{{"state", json::array({state.x, state.y})},
           {"grid_x", axis},
           {"grid_y", axis},
           {"q", std::move(qrows)},
           {"samples", std::move(samples)}};
  if (baseline != nullptr) {
    const Matrix b = baseline->actor()->act(s, z);
    json pts = json::array();
    for (Eigen::Index r = 0; r < b.rows(); ++r) pts.push_back(pair(b, r));
    doc["baseline_samples"] = std::move(pts);
  }
  return doc;
}

}  // namespace deflow
