#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "grle/common.hpp"

namespace grle::nn {

// A trainable matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode recording of matrix-valued operations. Nodes are appended in
// evaluation order, so a reverse sweep visits every node after its consumers.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Matrix value);
  Var param(Parameter& p);
  Var record(Matrix value, std::vector<int> parents, Backward backward);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool tracked(int id) const { return nodes_[id].tracked; }
  // Adds into a parent's gradient, allocating it on first use.
  Matrix& grad_accumulator(int id);

  // Seeds d(output)/d(output) and sweeps; parameter gradients are added to
  // Parameter::grad.
  void backward(Var output, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool tracked = false;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var scale(Var a, double factor);
// x + 1ᵀb for a 1 x C row b.
Var add_row(Var x, Var bias);
Var relu(Var x);
Var sigmoid(Var x);
Var concat_cols(Var a, Var b);
Var transpose(Var x);
Var gather_rows(Var x, std::vector<int> rows);
// Constant sparse operator applied on the left.
Var spmm(std::shared_ptr<const SparseMatrix> op, Var x);
// Sum of binary cross-entropy terms over a column of probabilities, with log
// arguments clamped at 1e-12. Returns a 1 x 1 node.
Var bce_sum(Var probs, const Vector& targets);

}  // namespace grle::nn
