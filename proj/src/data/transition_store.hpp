#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "numerics/rng.hpp"
#include "numerics/tape.hpp"

namespace deflow {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Dimension-checked transition list. With a capacity it behaves as a ring
/// buffer: once full, each push overwrites the oldest entry.
class TransitionStore {
 public:
  TransitionStore(int state_dim, int action_dim, std::optional<std::size_t> capacity = std::nullopt);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  std::optional<std::size_t> capacity() const { return capacity_; }

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  /// Logical order: index 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;

  bool operator==(const TransitionStore& other) const;

 private:
  int state_dim_;
  int action_dim_;
  std::optional<std::size_t> capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // ring mode: physical index of the oldest item
};

struct Batch {
  Matrix states;
  Matrix actions;
  Matrix rewards;    // B × 1
  Matrix next_states;
  Matrix terminals;  // B × 1, 0 or 1
  std::size_t online_count = 0;

  Eigen::Index size() const { return states.rows(); }
};

/// Uniform sampling with replacement. With a second (online) store and a mix
/// ratio, exactly round(ratio · batch_size) rows come from the online store
/// and the rest from `offline`; online rows follow the offline rows.
Batch sample_batch(const TransitionStore& offline, std::size_t batch_size, Rng& rng,
                   const TransitionStore* online = nullptr, double ratio = 0.0);

/// Packs an explicit list of transitions into a Batch.
Batch make_batch(const std::vector<const Transition*>& rows, int state_dim, int action_dim);

}  // namespace deflow
