#pragma once

#include <functional>
#include <string>
#include <vector>

#include "streakfix/tensor.hpp"

namespace streakfix::nn {

/// A named tensor of trainable weights with its gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::vector<Index> shape;
  Vector<Scalar> value;
  Vector<Scalar> grad;

  Parameter() = default;
  explicit Parameter(std::vector<Index> s) : shape(std::move(s)) {
    Index n = 1;
    for (Index d : shape) n *= d;
    value = Vector<Scalar>::Zero(n);
    grad = Vector<Scalar>::Zero(n);
  }

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }

  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows) {
    return {value.data(), rows, value.size() / rows};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows) const {
    return {value.data(), rows, value.size() / rows};
  }
  Eigen::Map<RowMatrix<Scalar>> grad_matrix(Index rows) {
    return {grad.data(), rows, grad.size() / rows};
  }
};

/// Non-trainable state (batch-norm running statistics).
template <typename Scalar>
struct Buffer {
  std::vector<Index> shape;
  Vector<Scalar> value;
};

template <typename Scalar>
using ParameterVisitor = std::function<void(const std::string&, Parameter<Scalar>&)>;
template <typename Scalar>
using BufferVisitor = std::function<void(const std::string&, Buffer<Scalar>&)>;

}  // namespace streakfix::nn
