#include "numerics/ops.hpp"

#include <string>

#include "common/error.hpp"

namespace deflow::ops {
namespace {

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": shape " + dims(a.value()) + " vs " + dims(b.value()));
  }
}

Tape& tape_of(const Var& a) {
  require(a.valid(), "ops: unbound Var");
  return *a.tape();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::shape_mismatch, "matmul: " + dims(a.value()) + " * " + dims(b.value()));
  }
  Tape& t = tape_of(a);
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a.id())) tp.accumulate(a.id(), g * b.value().transpose());
    if (tp.needs_grad(b.id())) tp.accumulate(b.id(), a.value().transpose() * g);
  });
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows()) {
    fail(ErrorCode::shape_mismatch,
         "affine: input has " + std::to_string(x.cols()) + " features, layer expects " + std::to_string(weight.rows()));
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    fail(ErrorCode::shape_mismatch, "affine: bias " + dims(bias.value()) + " vs weight " + dims(weight.value()));
  }
  Tape& t = tape_of(x);
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return t.record(std::move(out), {x, weight, bias}, [x, weight, bias](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(x.id())) tp.accumulate(x.id(), g * weight.value().transpose());
    if (tp.needs_grad(weight.id())) tp.accumulate(weight.id(), x.value().transpose() * g);
    if (tp.needs_grad(bias.id())) tp.accumulate(bias.id(), g.colwise().sum());
  });
}

Var relu(const Var& x) {
  Tape& t = tape_of(x);
  Matrix out = x.value().cwiseMax(0.0);
  return t.record(std::move(out), {x}, [x](Tape& tp, const Matrix& g) {
    Matrix mask = (x.value().array() > 0.0).cast<double>().matrix();
    tp.accumulate(x.id(), g.cwiseProduct(mask));
  });
}

Var tanh(const Var& x) {
  Tape& t = tape_of(x);
  Matrix out = x.value().array().tanh().matrix();
  return t.record(Matrix(out), {x}, [x, out](Tape& tp, const Matrix& g) {
    tp.accumulate(x.id(), (g.array() * (1.0 - out.array().square())).matrix());
  });
}

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  Tape& t = tape_of(a);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id(), g);
    tp.accumulate(b.id(), g);
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id(), g);
    tp.accumulate(b.id(), -g);
  });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a.id())) tp.accumulate(a.id(), g.cwiseProduct(b.value()));
    if (tp.needs_grad(b.id())) tp.accumulate(b.id(), g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double factor) {
  Tape& t = tape_of(a);
  return t.record(a.value() * factor, {a}, [a, factor](Tape& tp, const Matrix& g) { tp.accumulate(a.id(), g * factor); });
}

Var square(const Var& a) {
  Tape& t = tape_of(a);
  return t.record(a.value().array().square().matrix(), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id(), 2.0 * g.cwiseProduct(a.value()));
  });
}

Var clamp(const Var& x, double lo, double hi) {
  require(lo < hi, "clamp: lo must be below hi");
  Tape& t = tape_of(x);
  Matrix out = x.value().cwiseMax(lo).cwiseMin(hi);
  return t.record(std::move(out), {x}, [x, lo, hi](Tape& tp, const Matrix& g) {
    Matrix mask = ((x.value().array() > lo) && (x.value().array() < hi)).cast<double>().matrix();
    tp.accumulate(x.id(), g.cwiseProduct(mask));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no operands");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) fail(ErrorCode::shape_mismatch, "concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, const Matrix& g) {
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
      if (tp.needs_grad(p.id())) tp.accumulate(p.id(), g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

Var column(const Var& x, Eigen::Index j) {
  require(j >= 0 && j < x.cols(), "column: index out of range");
  Tape& t = tape_of(x);
  Matrix out = x.value().col(j);
  return t.record(std::move(out), {x}, [x, j](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    full.col(j) = g.col(0);
    tp.accumulate(x.id(), full);
  });
}

Var row_sum(const Var& x) {
  Tape& t = tape_of(x);
  Matrix out = x.value().rowwise().sum();
  return t.record(std::move(out), {x}, [x](Tape& tp, const Matrix& g) {
    Matrix full = g.col(0).replicate(1, x.cols());
    tp.accumulate(x.id(), full);
  });
}

Var sum(const Var& x) {
  Tape& t = tape_of(x);
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.record(std::move(out), {x}, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x.id(), Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(const Var& x) {
  require(x.value().size() > 0, "mean: empty operand");
  Tape& t = tape_of(x);
  const double n = static_cast<double>(x.value().size());
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() / n;
  return t.record(std::move(out), {x}, [x, n](Tape& tp, const Matrix& g) {
    tp.accumulate(x.id(), Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Var stop_gradient(const Var& x) { return tape_of(x).detach(x); }

}  // namespace deflow::ops
