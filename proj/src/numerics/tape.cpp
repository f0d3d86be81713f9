#include "numerics/tape.hpp"

#include "common/error.hpp"

namespace deflow {

const Matrix& Var::value() const {
  require(tape_ != nullptr, "Var: value() on an unbound handle");
  return tape_->value_of(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    fail(ErrorCode::shape_mismatch, "Var::scalar: expected 1x1, got " + std::to_string(v.rows()) + "x" +
                                        std::to_string(v.cols()));
  }
  return v(0, 0);
}

const Matrix& Tape::value_of(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external != nullptr ? *n.external : n.value;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_view(const Matrix& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Matrix& value, ParamKey key) {
  Node n;
  n.external = &value;
  n.needs_grad = true;
  n.is_param = true;
  n.key = key;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    check_owned(p, "record");
    n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::detach(const Var& x) {
  check_owned(x, "detach");
  return constant(x.value());
}

void Tape::check_owned(const Var& v, const char* what) const {
  if (v.tape() != this) fail(ErrorCode::invalid_argument, std::string("Tape::") + what + ": value is not on this tape");
}

void Tape::accumulate(std::size_t id, const Matrix& contribution) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.has_grad) {
    n.grad = contribution;
    n.has_grad = true;
  } else {
    n.grad += contribution;
  }
}

void Tape::backward(const Var& loss) {
  check_owned(loss, "backward");
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    fail(ErrorCode::shape_mismatch, "Tape::backward: loss must be scalar, got " + std::to_string(lv.rows()) + "x" +
                                        std::to_string(lv.cols()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  swept_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  accumulate(loss.id(), Matrix::Ones(1, 1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

bool Tape::requires_grad(const Var& v) const {
  check_owned(v, "requires_grad");
  return nodes_[v.id()].needs_grad;
}

const Matrix* Tape::grad(const Var& v) const {
  check_owned(v, "grad");
  const Node& n = nodes_[v.id()];
  return n.has_grad ? &n.grad : nullptr;
}

Matrix Tape::param_grad(ParamKey key, Eigen::Index rows, Eigen::Index cols) const {
  Matrix total = Matrix::Zero(rows, cols);
  for (const Node& n : nodes_) {
    if (!n.is_param || !(n.key == key) || !n.has_grad) continue;
    if (n.grad.rows() != rows || n.grad.cols() != cols) {
      fail(ErrorCode::shape_mismatch, "Tape::param_grad: gradient shape does not match parameter");
    }
    total += n.grad;
  }
  return total;
}

}  // namespace deflow
