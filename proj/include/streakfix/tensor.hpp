#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

#include "streakfix/errors.hpp"

namespace streakfix {

using Index = Eigen::Index;

/// NCHW extent of a batch of feature maps.
struct Shape4 {
  Index n = 0, c = 0, h = 0, w = 0;
  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + "]";
  }
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense NCHW tensor over a contiguous Eigen vector.
///
/// Planes (one n, one c) are exposed as row-major Eigen maps so that
/// per-channel image arithmetic composes with ordinary Eigen expressions.
template <typename Scalar>
class Tensor {
 public:
  using PlaneMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  explicit Tensor(const Shape4& s) : shape_(s), data_(Vector<Scalar>::Zero(s.size())) {}
  Tensor(Index n, Index c, Index h, Index w) : Tensor(Shape4{n, c, h, w}) {}

  static Tensor constant(const Shape4& s, Scalar v) {
    Tensor t(s);
    t.data_.setConstant(v);
    return t;
  }

  const Shape4& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector<Scalar>& values() { return data_; }
  const Vector<Scalar>& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(Index n, Index c, Index y, Index x) {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  Scalar operator()(Index n, Index c, Index y, Index x) const {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }

  PlaneMap plane(Index n, Index c) {
    return PlaneMap(data_.data() + (n * shape_.c + c) * shape_.plane(), shape_.h, shape_.w);
  }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(data_.data() + (n * shape_.c + c) * shape_.plane(), shape_.h, shape_.w);
  }

  /// All channels of one sample as a (c, h*w) row-major matrix.
  Eigen::Map<RowMatrix<Scalar>> sample(Index n) {
    return {data_.data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane()};
  }
  Eigen::Map<const RowMatrix<Scalar>> sample(Index n) const {
    return {data_.data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane()};
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.values() = data_.template cast<Other>();
    return out;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "operator+=");
    data_ += o.data_;
    return *this;
  }

  void require_same_shape(const Tensor& o, const char* where) const {
    if (!(shape_ == o.shape_)) {
      throw InputError(std::string(where) + ": shape mismatch " + shape_.str() + " vs " +
                       o.shape_.str());
    }
  }

 private:
  Shape4 shape_;
  Vector<Scalar> data_;
};

inline void require_divisible(Index h, Index w, Index factor, const char* who) {
  if (h <= 0 || w <= 0 || h % factor != 0 || w % factor != 0) {
    throw InputError(std::string(who) + ": spatial size " + std::to_string(h) + "x" +
                     std::to_string(w) + " must be a positive multiple of " +
                     std::to_string(factor) + " (pad the input to a multiple of " +
                     std::to_string(factor) + ")");
  }
}

/// Channel-wise concatenation [a, b] for tensors that share n, h, w.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw InputError("concat_channels: incompatible shapes " + a.shape().str() + " and " +
                     b.shape().str());
  }
  Tensor<Scalar> out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (Index n = 0; n < a.n(); ++n) {
    out.sample(n).topRows(a.c()) = a.sample(n);
    out.sample(n).bottomRows(b.c()) = b.sample(n);
  }
  return out;
}

/// Inverse of concat_channels: splits the first `first_channels` channels off.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& t,
                                                         Index first_channels) {
  Tensor<Scalar> a(t.n(), first_channels, t.h(), t.w());
  Tensor<Scalar> b(t.n(), t.c() - first_channels, t.h(), t.w());
  for (Index n = 0; n < t.n(); ++n) {
    a.sample(n) = t.sample(n).topRows(first_channels);
    b.sample(n) = t.sample(n).bottomRows(t.c() - first_channels);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace streakfix
