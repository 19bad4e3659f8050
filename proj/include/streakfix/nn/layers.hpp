#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "streakfix/nn/im2col.hpp"
#include "streakfix/nn/parameter.hpp"

namespace streakfix::nn {

// ---------------------------------------------------------------------------
// Free functions. Weights are row-major matrices in the PyTorch memory order:
// conv (Cout, Cin*k*k), transposed conv (Cin, Cout*k*k).

template <typename Scalar, typename WeightDerived>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Eigen::MatrixBase<WeightDerived>& weight,
                      const Vector<Scalar>* bias, const ConvGeometry& g) {
  const Index oh = g.out_extent(x.h()), ow = g.out_extent(x.w());
  if (weight.cols() != x.c() * g.kernel * g.kernel) {
    throw InputError("conv2d: input has " + std::to_string(x.c()) +
                     " channels, weight expects " +
                     std::to_string(weight.cols() / (g.kernel * g.kernel)));
  }
  RowMatrix<Scalar> y = weight * im2col(x, g, oh, ow);
  if (bias) y.colwise() += *bias;
  return rows_as_channels(y, x.n(), oh, ow);
}

template <typename Scalar, typename WeightDerived>
Tensor<Scalar> conv2d_grad_input(const Tensor<Scalar>& grad_out,
                                 const Eigen::MatrixBase<WeightDerived>& weight,
                                 const ConvGeometry& g, const Shape4& input_shape) {
  RowMatrix<Scalar> gcols = weight.transpose() * channels_as_rows(grad_out);
  return col2im(gcols, input_shape, g, grad_out.h(), grad_out.w());
}

/// Returns dL/dW for one convolution; the caller accumulates.
template <typename Scalar>
RowMatrix<Scalar> conv2d_grad_weight(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out,
                                     const ConvGeometry& g) {
  return channels_as_rows(grad_out) * im2col(x, g, grad_out.h(), grad_out.w()).transpose();
}

template <typename Scalar, typename WeightDerived>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& x,
                                const Eigen::MatrixBase<WeightDerived>& weight,
                                const Vector<Scalar>* bias, const ConvGeometry& g) {
  const Index k2 = g.kernel * g.kernel;
  if (weight.rows() != x.c()) {
    throw InputError("conv_transpose2d: input has " + std::to_string(x.c()) +
                     " channels, weight expects " + std::to_string(weight.rows()));
  }
  const Index cout = weight.cols() / k2;
  const Shape4 out{x.n(), cout, g.transposed_extent(x.h()), g.transposed_extent(x.w())};
  RowMatrix<Scalar> cols = weight.transpose() * channels_as_rows(x);
  Tensor<Scalar> y = col2im(cols, out, g, x.h(), x.w());
  if (bias) {
    for (Index n = 0; n < y.n(); ++n) y.sample(n).colwise() += *bias;
  }
  return y;
}

template <typename Scalar, typename WeightDerived>
Tensor<Scalar> conv_transpose2d_grad_input(const Tensor<Scalar>& grad_out,
                                           const Eigen::MatrixBase<WeightDerived>& weight,
                                           const ConvGeometry& g, Index in_h, Index in_w) {
  RowMatrix<Scalar> y = weight * im2col(grad_out, g, in_h, in_w);
  return rows_as_channels(y, grad_out.n(), in_h, in_w);
}

template <typename Scalar>
RowMatrix<Scalar> conv_transpose2d_grad_weight(const Tensor<Scalar>& x,
                                               const Tensor<Scalar>& grad_out,
                                               const ConvGeometry& g) {
  return channels_as_rows(x) * im2col(grad_out, g, x.h(), x.w()).transpose();
}

/// Sum of `t` over n, h, w for every channel.
template <typename Scalar>
Vector<Scalar> channel_sums(const Tensor<Scalar>& t) {
  Vector<Scalar> s = Vector<Scalar>::Zero(t.c());
  for (Index n = 0; n < t.n(); ++n) s += t.sample(n).rowwise().sum();
  return s;
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope) {
  Tensor<Scalar> y(x.shape());
  y.values() = x.values().unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
  return y;
}

/// Gradient of leaky_relu given its input or output (same sign).
template <typename Scalar>
Tensor<Scalar> leaky_relu_grad(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& activation,
                               Scalar slope) {
  Tensor<Scalar> g(grad_out.shape());
  g.values() = grad_out.values().binaryExpr(
      activation.values(), [slope](Scalar gy, Scalar a) { return a > Scalar(0) ? gy : slope * gy; });
  return g;
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  y.values() = x.values().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
  for (Index n = 0; n < x.n(); ++n)
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.plane(n, c);
      auto dst = y.plane(n, c);
      for (Index i = 0; i < y.h(); ++i)
        for (Index j = 0; j < y.w(); ++j) dst(i, j) = src(i / 2, j / 2);
    }
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x_grad(const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> g(grad_out.n(), grad_out.c(), grad_out.h() / 2, grad_out.w() / 2);
  for (Index n = 0; n < g.n(); ++n)
    for (Index c = 0; c < g.c(); ++c) {
      auto src = grad_out.plane(n, c);
      auto dst = g.plane(n, c);
      for (Index i = 0; i < src.rows(); ++i)
        for (Index j = 0; j < src.cols(); ++j) dst(i / 2, j / 2) += src(i, j);
    }
  return g;
}

/// 2x2 stride-2 max pooling; `argmax` receives the flat input offset of each winner.
template <typename Scalar>
Tensor<Scalar> max_pool2x2(const Tensor<Scalar>& x, std::vector<Index>* argmax = nullptr) {
  Tensor<Scalar> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
  if (argmax) argmax->resize(static_cast<std::size_t>(y.size()));
  Index out = 0;
  for (Index n = 0; n < x.n(); ++n)
    for (Index c = 0; c < x.c(); ++c) {
      const Index base = (n * x.c() + c) * x.h() * x.w();
      for (Index i = 0; i < y.h(); ++i)
        for (Index j = 0; j < y.w(); ++j, ++out) {
          Index best = base + (2 * i) * x.w() + 2 * j;
          for (Index di = 0; di < 2; ++di)
            for (Index dj = 0; dj < 2; ++dj) {
              const Index at = base + (2 * i + di) * x.w() + 2 * j + dj;
              if (x.values()[at] > x.values()[best]) best = at;
            }
          y.values()[out] = x.values()[best];
          if (argmax) (*argmax)[static_cast<std::size_t>(out)] = best;
        }
    }
  return y;
}

template <typename Scalar>
Tensor<Scalar> max_pool2x2_grad(const Tensor<Scalar>& grad_out, const std::vector<Index>& argmax,
                                const Shape4& input_shape) {
  Tensor<Scalar> g(input_shape);
  for (Index i = 0; i < grad_out.size(); ++i)
    g.values()[argmax[static_cast<std::size_t>(i)]] += grad_out.values()[i];
  return g;
}

// ---------------------------------------------------------------------------
// Stateful layers. Each caches what its backward pass needs from the most
// recent forward call and accumulates parameter gradients into `grad`.

template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index pad,
         bool with_bias)
      : geometry_{kernel, stride, pad},
        weight({out_channels, in_channels, kernel, kernel}),
        with_bias_(with_bias) {
    if (with_bias_) bias = Parameter<Scalar>({out_channels});
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    return conv2d(x, weight.matrix(out_channels()), with_bias_ ? &bias.value : nullptr, geometry_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    weight.grad_matrix(out_channels()) += conv2d_grad_weight(input_, grad_out, geometry_);
    if (with_bias_) bias.grad += channel_sums(grad_out);
    return conv2d_grad_input(grad_out, weight.matrix(out_channels()), geometry_, input_.shape());
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    f(prefix + ".weight", weight);
    if (with_bias_) f(prefix + ".bias", bias);
  }

  Index out_channels() const { return weight.shape[0]; }
  Index in_channels() const { return weight.shape[1]; }
  bool has_bias() const { return with_bias_; }
  const ConvGeometry& geometry() const { return geometry_; }

 private:
  ConvGeometry geometry_;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  bool with_bias_ = false;
  Tensor<Scalar> input_;
};

template <typename Scalar>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index pad)
      : geometry_{kernel, stride, pad}, weight({in_channels, out_channels, kernel, kernel}) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    return conv_transpose2d(x, weight.matrix(in_channels()), static_cast<const Vector<Scalar>*>(nullptr), geometry_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    weight.grad_matrix(in_channels()) += conv_transpose2d_grad_weight(input_, grad_out, geometry_);
    return conv_transpose2d_grad_input(grad_out, weight.matrix(in_channels()), geometry_,
                                       input_.h(), input_.w());
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    f(prefix + ".weight", weight);
  }

  Index in_channels() const { return weight.shape[0]; }
  Index out_channels() const { return weight.shape[1]; }

 private:
  ConvGeometry geometry_;

 public:
  Parameter<Scalar> weight;

 private:
  Tensor<Scalar> input_;
};

/// Batch normalization over (n, h, w) per channel.
template <typename Scalar>
class BatchNorm2d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  explicit BatchNorm2d(Index channels)
      : gamma({channels}), beta({channels}) {
    gamma.value.setOnes();
    running_mean = {{channels}, Vector<Scalar>::Zero(channels)};
    running_var = {{channels}, Vector<Scalar>::Ones(channels)};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) {
    const Index channels = x.c();
    const Scalar count = Scalar(x.n() * x.shape().plane());
    Vector<Scalar> mean, var;
    if (training) {
      mean = channel_sums(x) / count;
      var = Vector<Scalar>::Zero(channels);
      for (Index n = 0; n < x.n(); ++n)
        var += (x.sample(n).colwise() - mean).rowwise().squaredNorm();
      var /= count;
      const Scalar m = Scalar(kMomentum);
      const Scalar unbias = count > Scalar(1) ? count / (count - Scalar(1)) : Scalar(1);
      running_mean.value = (Scalar(1) - m) * running_mean.value + m * mean;
      running_var.value = (Scalar(1) - m) * running_var.value + m * unbias * var;
    } else {
      mean = running_mean.value;
      var = running_var.value;
    }
    training_ = training;
    inv_std_ = (var.array() + Scalar(kEps)).rsqrt().matrix();
    normalized_ = Tensor<Scalar>(x.shape());
    Tensor<Scalar> y(x.shape());
    for (Index n = 0; n < x.n(); ++n) {
      normalized_.sample(n) =
          (x.sample(n).colwise() - mean).array().colwise() * inv_std_.array();
      y.sample(n) = (normalized_.sample(n).array().colwise() * gamma.value.array()).colwise() +
                    beta.value.array();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    const Vector<Scalar> sum_g = channel_sums(grad_out);
    Vector<Scalar> sum_gx = Vector<Scalar>::Zero(grad_out.c());
    for (Index n = 0; n < grad_out.n(); ++n)
      sum_gx += grad_out.sample(n).cwiseProduct(normalized_.sample(n)).rowwise().sum();
    gamma.grad += sum_gx;
    beta.grad += sum_g;

    Tensor<Scalar> gx(grad_out.shape());
    const Vector<Scalar> scale = gamma.value.cwiseProduct(inv_std_);
    if (!training_) {
      for (Index n = 0; n < gx.n(); ++n)
        gx.sample(n) = grad_out.sample(n).array().colwise() * scale.array();
      return gx;
    }
    const Scalar count = Scalar(grad_out.n() * grad_out.shape().plane());
    const Vector<Scalar> mean_g = sum_g / count;
    const Vector<Scalar> mean_gx = sum_gx / count;
    for (Index n = 0; n < gx.n(); ++n) {
      auto centered = (grad_out.sample(n).colwise() - mean_g).array() -
                      normalized_.sample(n).array().colwise() * mean_gx.array();
      gx.sample(n) = centered.colwise() * scale.array();
    }
    return gx;
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    f(prefix + ".weight", gamma);
    f(prefix + ".bias", beta);
  }
  void visit_buffers(const std::string& prefix, const BufferVisitor<Scalar>& f) {
    f(prefix + ".running_mean", running_mean);
    f(prefix + ".running_var", running_var);
  }

  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Buffer<Scalar> running_mean;
  Buffer<Scalar> running_var;

 private:
  bool training_ = true;
  Vector<Scalar> inv_std_;
  Tensor<Scalar> normalized_;
};

/// Activation choice for a conv/deconv + batch-norm block.
enum class Activation { kLeakyRelu, kRelu };

/// conv → batch-norm → activation. The conv carries no bias (batch-norm absorbs it).
template <typename Scalar, typename ConvT>
class NormActBlock {
 public:
  NormActBlock() = default;
  NormActBlock(ConvT conv, Index channels, Activation act)
      : conv(std::move(conv)), norm(channels), act_(act) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) {
    output_ = leaky_relu(norm.forward(conv.forward(x), training), slope());
    return output_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    return conv.backward(norm.backward(leaky_relu_grad(grad_out, output_, slope())));
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    conv.visit(prefix + ".conv", f);
    norm.visit(prefix + ".bn", f);
  }
  void visit_buffers(const std::string& prefix, const BufferVisitor<Scalar>& f) {
    norm.visit_buffers(prefix + ".bn", f);
  }

  ConvT conv;
  BatchNorm2d<Scalar> norm;

 private:
  Scalar slope() const { return act_ == Activation::kLeakyRelu ? Scalar(0.2) : Scalar(0); }
  Activation act_ = Activation::kLeakyRelu;
  Tensor<Scalar> output_;
};

template <typename Scalar>
using EncodingBlock = NormActBlock<Scalar, Conv2d<Scalar>>;
template <typename Scalar>
using DecodingBlock = NormActBlock<Scalar, ConvTranspose2d<Scalar>>;

template <typename Scalar>
EncodingBlock<Scalar> make_encoding_block(Index in, Index out, Index kernel, Index stride,
                                          Index pad) {
  return {Conv2d<Scalar>(in, out, kernel, stride, pad, false), out, Activation::kLeakyRelu};
}

template <typename Scalar>
DecodingBlock<Scalar> make_decoding_block(Index in, Index out) {
  return {ConvTranspose2d<Scalar>(in, out, 4, 2, 1), out, Activation::kRelu};
}

}  // namespace streakfix::nn
