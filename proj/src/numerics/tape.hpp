#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <deque>
#include <vector>

#include <Eigen/Dense>

namespace deflow {

/// Row-major dense matrix; rows index the batch, columns the feature.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Identity of a trainable tensor: the object owning it plus a slot index.
struct ParamKey {
  const void* owner = nullptr;
  std::size_t slot = 0;
  bool operator==(const ParamKey&) const = default;
};

/// Reverse-mode recording of primitive operations. Nodes are appended in
/// evaluation order, so reverse insertion order is a valid topological order
/// for the backward sweep.
class Tape {
 public:
  /// Receives the gradient flowing into a node and pushes contributions to its
  /// parents via `accumulate`.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a copy of `value`; receives no gradient.
  Var constant(Matrix value);
  /// Leaf viewing external storage without copying; receives no gradient.
  /// The storage must outlive the tape.
  Var constant_view(const Matrix& value);
  /// Trainable leaf viewing external storage. Gradients for every leaf with
  /// the same key are summed by `param_grad`.
  Var parameter(const Matrix& value, ParamKey key);

  /// Records an interior node. `backward` is only invoked when at least one
  /// parent requires a gradient.
  Var record(Matrix value, const std::vector<Var>& parents, BackwardFn backward);
  /// Records a node that is the identity forward but has no parents, so no
  /// gradient ever reaches the ancestors of `x`.
  Var detach(const Var& x);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards.
  void backward(const Var& loss);

  bool requires_grad(const Var& v) const;
  /// Gradient accumulated at `v` by the last backward pass, or nullptr.
  const Matrix* grad(const Var& v) const;
  /// Sum of gradients of all leaves registered under `key`; zeros of the given
  /// shape when the parameter was not reached.
  Matrix param_grad(ParamKey key, Eigen::Index rows, Eigen::Index cols) const;

  void accumulate(std::size_t id, const Matrix& contribution);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value_of(std::size_t id) const;

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    bool needs_grad = false;
    bool is_param = false;
    ParamKey key;
    BackwardFn backward;
    Matrix grad;
    bool has_grad = false;
  };

  void check_owned(const Var& v, const char* what) const;

  // deque keeps references returned by value() stable while recording.
  std::deque<Node> nodes_;
  bool swept_ = false;
};

}  // namespace deflow
