#include "grle/nn/autodiff.hpp"

#include <algorithm>

namespace grle::nn {

namespace {
constexpr double kLogFloor = 1e-12;
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::vector<int> parents, Backward backward) {
  const bool tracked = std::any_of(parents.begin(), parents.end(), [&](int p) { return nodes_[p].tracked; });
  nodes_.push_back(Node{std::move(value), {}, tracked ? std::move(backward) : Backward{}, nullptr, tracked});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_accumulator(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var output, double seed) {
  const int out = output.id();
  if (nodes_[out].value.size() != 1) throw DimensionError("backward() needs a scalar output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_accumulator(out).setConstant(seed);
  for (int id = out; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.tracked || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols()) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " by " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Tape& t = a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.tracked(ia)) t.grad_accumulator(ia).noalias() += g * t.value(ib).transpose();
    if (t.tracked(ib)) t.grad_accumulator(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("add: shape mismatch");
  Tape& t = a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    if (t.tracked(ia)) t.grad_accumulator(ia) += t.grad(self);
    if (t.tracked(ib)) t.grad_accumulator(ib) += t.grad(self);
  });
}

Var scale(Var a, double factor) {
  Tape& t = a.tape();
  const int ia = a.id();
  return t.record(a.value() * factor, {ia}, [ia, factor](Tape& t, int self) {
    t.grad_accumulator(ia) += factor * t.grad(self);
  });
}

Var add_row(Var x, Var bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) throw DimensionError("add_row: bias must be 1 x cols");
  Tape& t = x.tape();
  const int ix = x.id(), ib = bias.id();
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return t.record(std::move(out), {ix, ib}, [ix, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.tracked(ix)) t.grad_accumulator(ix) += g;
    if (t.tracked(ib)) t.grad_accumulator(ib) += g.colwise().sum();
  });
}

Var relu(Var x) {
  Tape& t = x.tape();
  const int ix = x.id();
  return t.record(x.value().cwiseMax(0.0), {ix}, [ix](Tape& t, int self) {
    t.grad_accumulator(ix).array() += (t.value(ix).array() > 0.0).cast<double>() * t.grad(self).array();
  });
}

Var sigmoid(Var x) {
  Tape& t = x.tape();
  const int ix = x.id();
  Matrix out = x.value().unaryExpr([](double v) { return grle::sigmoid(v); });
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    const auto s = t.value(self).array();
    t.grad_accumulator(ix).array() += s * (1.0 - s) * t.grad(self).array();
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row count mismatch");
  Tape& t = a.tape();
  const int ia = a.id(), ib = b.id();
  const Index ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out << a.value(), b.value();
  return t.record(std::move(out), {ia, ib}, [ia, ib, ca, cb](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.tracked(ia)) t.grad_accumulator(ia) += g.leftCols(ca);
    if (t.tracked(ib)) t.grad_accumulator(ib) += g.rightCols(cb);
  });
}

Var transpose(Var x) {
  Tape& t = x.tape();
  const int ix = x.id();
  return t.record(x.value().transpose(), {ix}, [ix](Tape& t, int self) {
    t.grad_accumulator(ix) += t.grad(self).transpose();
  });
}

Var gather_rows(Var x, std::vector<int> rows) {
  Tape& t = x.tape();
  const int ix = x.id();
  const Matrix& src = x.value();
  Matrix out(static_cast<Index>(rows.size()), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= src.rows()) throw DimensionError("gather_rows: index out of range");
    out.row(static_cast<Index>(r)) = src.row(rows[r]);
  }
  return t.record(std::move(out), {ix}, [ix, rows = std::move(rows)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& acc = t.grad_accumulator(ix);
    for (std::size_t r = 0; r < rows.size(); ++r) acc.row(rows[r]) += g.row(static_cast<Index>(r));
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> op, Var x) {
  if (op->cols() != x.rows()) throw DimensionError("spmm: operator width does not match input rows");
  Tape& t = x.tape();
  const int ix = x.id();
  Matrix out = (*op) * x.value();
  return t.record(std::move(out), {ix}, [ix, op = std::move(op)](Tape& t, int self) {
    t.grad_accumulator(ix).noalias() += op->transpose() * t.grad(self);
  });
}

Var bce_sum(Var probs, const Vector& targets) {
  if (probs.cols() != 1 || probs.rows() != targets.size()) throw DimensionError("bce: scores and targets differ in shape");
  Tape& t = probs.tape();
  const int ip = probs.id();
  const Matrix& f = probs.value();
  double loss = 0.0;
  for (Index e = 0; e < f.rows(); ++e) {
    const double p = f(e, 0), y = targets(e);
    loss -= y * std::log(std::max(p, kLogFloor)) + (1.0 - y) * std::log(std::max(1.0 - p, kLogFloor));
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return t.record(std::move(out), {ip}, [ip, targets](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    const Matrix& f = t.value(ip);
    Matrix& acc = t.grad_accumulator(ip);
    for (Index e = 0; e < f.rows(); ++e) {
      const double p = f(e, 0), y = targets(e);
      double d = 0.0;
      if (p > kLogFloor) d -= y / p;
      if (1.0 - p > kLogFloor) d += (1.0 - y) / (1.0 - p);
      acc(e, 0) += g * d;
    }
  });
}

}  // namespace grle::nn
