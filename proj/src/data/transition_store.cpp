#include "data/transition_store.hpp"

#include <cmath>
#include <string>

#include "common/error.hpp"

namespace deflow {

TransitionStore::TransitionStore(int state_dim, int action_dim, std::optional<std::size_t> capacity)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {
  require(state_dim > 0 && action_dim > 0, "TransitionStore: dimensions must be positive");
  require(!capacity || *capacity > 0, "TransitionStore: capacity must be positive");
}

void TransitionStore::push(Transition t) {
  if (t.state.size() != static_cast<std::size_t>(state_dim_) ||
      t.next_state.size() != static_cast<std::size_t>(state_dim_) ||
      t.action.size() != static_cast<std::size_t>(action_dim_)) {
    fail(ErrorCode::shape_mismatch, "TransitionStore::push: expected state_dim " + std::to_string(state_dim_) +
                                        ", action_dim " + std::to_string(action_dim_));
  }
  if (capacity_ && items_.size() == *capacity_) {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % *capacity_;
    return;
  }
  items_.push_back(std::move(t));
}

const Transition& TransitionStore::at(std::size_t i) const {
  require(i < items_.size(), "TransitionStore::at: index out of range");
  if (!capacity_ || items_.size() < *capacity_) return items_[i];
  return items_[(head_ + i) % *capacity_];
}

bool TransitionStore::operator==(const TransitionStore& other) const {
  if (state_dim_ != other.state_dim_ || action_dim_ != other.action_dim_ || size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(at(i) == other.at(i))) return false;
  }
  return true;
}

Batch make_batch(const std::vector<const Transition*>& rows, int state_dim, int action_dim) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Batch b;
  b.states.resize(n, state_dim);
  b.actions.resize(n, action_dim);
  b.rewards.resize(n, 1);
  b.next_states.resize(n, state_dim);
  b.terminals.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *rows[static_cast<std::size_t>(i)];
    for (int j = 0; j < state_dim; ++j) {
      b.states(i, j) = t.state[j];
      b.next_states(i, j) = t.next_state[j];
    }
    for (int j = 0; j < action_dim; ++j) b.actions(i, j) = t.action[j];
    b.rewards(i, 0) = t.reward;
    b.terminals(i, 0) = t.terminal ? 1.0 : 0.0;
  }
  return b;
}

Batch sample_batch(const TransitionStore& offline, std::size_t batch_size, Rng& rng, const TransitionStore* online,
                   double ratio) {
  require(!offline.empty(), "sample_batch: offline store is empty");
  require(ratio >= 0.0 && ratio <= 1.0, "sample_batch: mix ratio must lie in [0, 1]");
  std::size_t n_online = 0;
  if (online != nullptr) {
    n_online = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(batch_size)));
    if (n_online > 0) require(!online->empty(), "sample_batch: online store is empty");
    if (online->state_dim() != offline.state_dim() || online->action_dim() != offline.action_dim()) {
      fail(ErrorCode::shape_mismatch, "sample_batch: online/offline store dimensions differ");
    }
  }
  std::vector<const Transition*> rows;
  rows.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size - n_online; ++i) rows.push_back(&offline.at(rng.below(offline.size())));
  for (std::size_t i = 0; i < n_online; ++i) rows.push_back(&online->at(rng.below(online->size())));
  Batch b = make_batch(rows, offline.state_dim(), offline.action_dim());
  b.online_count = n_online;
  return b;
}

}  // namespace deflow
