#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace grle {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// A decision violates the one-server / one-exit constraints.
struct ConstraintViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerically stable logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + exp(-x));
  }
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace grle
