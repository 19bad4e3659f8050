#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "streakfix/nn/layers.hpp"

namespace streakfix {

/// Named feature tap points of the perceptual network.
enum class TapName { kI, kJ1, kJ2 };

std::string to_string(TapName tap);

/// A tap resolved against a concrete extractor.
struct FeatureTap {
  TapName name = TapName::kI;
  int layer = 0;
  Index stride = 1;
  Index channels = 1;
};

/// Layer indices of the taps in the sequential enumeration of the VGG-16
/// feature stage (conv, relu and pool layers counted from 0).
struct TapLayers {
  int i = 8;    // relu2_2, stride 2
  int j1 = 16;  // pool3, stride 8
  int j2 = 9;   // pool2, stride 4
  int layer(TapName t) const { return t == TapName::kI ? i : (t == TapName::kJ1 ? j1 : j2); }
};

/// ImageNet channel statistics the extractor was trained against.
inline constexpr std::array<double, 3> kChannelMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kChannelStd{0.229, 0.224, 0.225};

/// Replicates a (N, 1, H, W) image batch in [0,1] to three normalized channels.
template <typename Scalar>
Tensor<Scalar> preprocess(const Tensor<Scalar>& images) {
  if (images.c() != 1) throw InputError("preprocess: expected single-channel images");
  for (Index i = 0; i < images.size(); ++i) {
    const Scalar v = images.values()[i];
    if (!(v >= Scalar(-1e-6) && v <= Scalar(1 + 1e-6))) {
      throw InputError("preprocess: pixel value " + std::to_string(double(v)) +
                       " outside [0,1]");
    }
  }
  Tensor<Scalar> out(images.n(), 3, images.h(), images.w());
  for (Index n = 0; n < images.n(); ++n)
    for (Index c = 0; c < 3; ++c)
      out.plane(n, c) = (images.plane(n, 0).array() - Scalar(kChannelMean[c])) /
                        Scalar(kChannelStd[c]);
  return out;
}

template <typename Scalar>
Tensor<Scalar> preprocess_grad(const Tensor<Scalar>& grad) {
  Tensor<Scalar> g(grad.n(), 1, grad.h(), grad.w());
  for (Index n = 0; n < grad.n(); ++n)
    for (Index c = 0; c < 3; ++c) g.plane(n, 0) += grad.plane(n, c) / Scalar(kChannelStd[c]);
  return g;
}

/// Record of one extractor forward pass: requested tap outputs plus whatever
/// the extractor needs to backpropagate to the input.
template <typename Scalar>
struct FeaturePass {
  std::map<TapName, Tensor<Scalar>> features;
  Shape4 input_shape;
  std::vector<Tensor<Scalar>> layer_outputs;
  std::vector<std::vector<Index>> pool_argmax;

  const Tensor<Scalar>& at(TapName t) const {
    auto it = features.find(t);
    if (it == features.end()) throw InputError("feature pass lacks tap " + to_string(t));
    return it->second;
  }
};

/// Frozen feature extractor. All methods are const; concurrent use is safe.
template <typename Scalar>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureTap tap(TapName name) const = 0;
  /// images: (N, 1, H, W) in [0,1]. `keep_for_backward` retains activations.
  virtual FeaturePass<Scalar> forward(const Tensor<Scalar>& images,
                                      const std::vector<TapName>& taps,
                                      bool keep_for_backward) const = 0;
  /// Gradient of a scalar loss w.r.t. the input images, given dL/d(tap features).
  virtual Tensor<Scalar> backward(const FeaturePass<Scalar>& pass, TapName tap,
                                  const Tensor<Scalar>& grad) const = 0;

  /// Convenience wrapper: one tap, no backward.
  Tensor<Scalar> extract(const Tensor<Scalar>& images, TapName t) const {
    return forward(images, {t}, false).features.at(t);
  }
};

/// Identity features at stride 1 for every tap (oracle tests of the losses).
template <typename Scalar>
class StubExtractor final : public FeatureExtractor<Scalar> {
 public:
  FeatureTap tap(TapName name) const override { return {name, 0, 1, 1}; }

  FeaturePass<Scalar> forward(const Tensor<Scalar>& images, const std::vector<TapName>& taps,
                              bool) const override {
    FeaturePass<Scalar> pass;
    pass.input_shape = images.shape();
    for (TapName t : taps) pass.features[t] = images;
    return pass;
  }

  Tensor<Scalar> backward(const FeaturePass<Scalar>&, TapName,
                          const Tensor<Scalar>& grad) const override {
    return grad;
  }
};

/// Named float32 tensor as stored in the weights/checkpoint container.
struct NamedTensor {
  std::vector<Index> shape;
  std::vector<float> data;
};

/// VGG-16 convolutional feature stage (configuration D), truncated to the
/// convolutions present in the weights file.
template <typename Scalar>
class Vgg16Features final : public FeatureExtractor<Scalar> {
 public:
  static constexpr std::array<int, 18> kConfig{64, 64, -1, 128, 128, -1, 256, 256, 256, -1,
                                               512, 512, 512, -1, 512, 512, 512, -1};

  Vgg16Features(const std::map<std::string, NamedTensor>& weights, TapLayers taps)
      : taps_(taps) {
    Index in = 3;
    Index stride = 1;
    int conv_index = 0;
    for (int entry : kConfig) {
      if (entry < 0) {
        layers_.push_back({Kind::kPool, -1});
        stride *= 2;
        strides_.push_back(stride);
        channels_.push_back(in);
        continue;
      }
      const std::string name = "features." + std::to_string(layers_.size());
      auto w = weights.find(name + ".weight");
      auto b = weights.find(name + ".bias");
      if (w == weights.end() || b == weights.end()) break;
      const std::vector<Index> expected{entry, in, 3, 3};
      if (w->second.shape != expected || b->second.shape != std::vector<Index>{entry}) {
        throw IoError("perceptual weights: tensor " + name + " has unexpected shape");
      }
      Conv c;
      c.weight = Eigen::Map<const RowMatrix<float>>(w->second.data.data(), entry, in * 9)
                     .template cast<Scalar>();
      c.bias = Eigen::Map<const Vector<float>>(b->second.data.data(), entry).template cast<Scalar>();
      convs_.push_back(std::move(c));
      layers_.push_back({Kind::kConv, conv_index++});
      strides_.push_back(stride);
      channels_.push_back(entry);
      layers_.push_back({Kind::kRelu, -1});
      strides_.push_back(stride);
      channels_.push_back(entry);
      in = entry;
    }
    if (convs_.empty()) throw IoError("perceptual weights: no convolution layers found");
    for (TapName t : {TapName::kI, TapName::kJ1, TapName::kJ2}) {
      const int l = taps_.layer(t);
      if (l < 0 || l >= static_cast<int>(layers_.size())) {
        throw ConfigError("perceptual tap " + to_string(t) + " at layer " + std::to_string(l) +
                          " is beyond the " + std::to_string(layers_.size()) +
                          " layers available from the weights file");
      }
    }
  }

  int depth() const { return static_cast<int>(layers_.size()); }

  FeatureTap tap(TapName name) const override {
    const int l = taps_.layer(name);
    return {name, l, strides_[l], channels_[l]};
  }

  FeaturePass<Scalar> forward(const Tensor<Scalar>& images, const std::vector<TapName>& taps,
                              bool keep_for_backward) const override {
    require_divisible(images.h(), images.w(), 8, "perceptual extractor");
    FeaturePass<Scalar> pass;
    pass.input_shape = images.shape();
    int deepest = -1;
    for (TapName t : taps) deepest = std::max(deepest, taps_.layer(t));
    Tensor<Scalar> h = preprocess(images);
    if (keep_for_backward) pass.layer_outputs.reserve(static_cast<std::size_t>(deepest + 1));
    for (int l = 0; l <= deepest; ++l) {
      const Layer& layer = layers_[static_cast<std::size_t>(l)];
      switch (layer.kind) {
        case Kind::kConv: {
          const Conv& c = convs_[static_cast<std::size_t>(layer.conv)];
          h = nn::conv2d(h, c.weight, &c.bias, kGeometry);
          break;
        }
        case Kind::kRelu:
          h.values() = h.values().cwiseMax(Scalar(0));
          break;
        case Kind::kPool: {
          std::vector<Index> argmax;
          h = nn::max_pool2x2(h, keep_for_backward ? &argmax : nullptr);
          if (keep_for_backward) pass.pool_argmax.push_back(std::move(argmax));
          break;
        }
      }
      for (TapName t : taps)
        if (taps_.layer(t) == l) pass.features[t] = h;
      if (keep_for_backward) pass.layer_outputs.push_back(h);
    }
    return pass;
  }

  Tensor<Scalar> backward(const FeaturePass<Scalar>& pass, TapName tap,
                          const Tensor<Scalar>& grad) const override {
    const int from = taps_.layer(tap);
    if (static_cast<int>(pass.layer_outputs.size()) <= from) {
      throw InputError("perceptual backward: forward pass was not kept for backward");
    }
    Tensor<Scalar> g = grad;
    std::size_t pool_slot = 0;
    for (int l = 0; l < from; ++l)
      if (layers_[static_cast<std::size_t>(l)].kind == Kind::kPool) ++pool_slot;
    if (layers_[static_cast<std::size_t>(from)].kind == Kind::kPool) ++pool_slot;

    for (int l = from; l >= 0; --l) {
      const Layer& layer = layers_[static_cast<std::size_t>(l)];
      const Shape4 in_shape = l == 0 ? Shape4{pass.input_shape.n, 3, pass.input_shape.h,
                                              pass.input_shape.w}
                                     : pass.layer_outputs[static_cast<std::size_t>(l - 1)].shape();
      switch (layer.kind) {
        case Kind::kConv:
          g = nn::conv2d_grad_input(g, convs_[static_cast<std::size_t>(layer.conv)].weight,
                                    kGeometry, in_shape);
          break;
        case Kind::kRelu: {
          const auto& out = pass.layer_outputs[static_cast<std::size_t>(l)].values();
          g.values() = g.values().binaryExpr(
              out, [](Scalar gy, Scalar y) { return y > Scalar(0) ? gy : Scalar(0); });
          break;
        }
        case Kind::kPool:
          g = nn::max_pool2x2_grad(g, pass.pool_argmax[--pool_slot], in_shape);
          break;
      }
    }
    return preprocess_grad(g);
  }

  /// Parameters as stored; used by the frozen-weights checks.
  std::uint64_t fingerprint() const;

 private:
  enum class Kind { kConv, kRelu, kPool };
  struct Layer {
    Kind kind;
    int conv;
  };
  struct Conv {
    RowMatrix<Scalar> weight;
    Vector<Scalar> bias;
  };
  static constexpr nn::ConvGeometry kGeometry{3, 1, 1};

  TapLayers taps_;
  std::vector<Layer> layers_;
  std::vector<Index> strides_;
  std::vector<Index> channels_;
  std::vector<Conv> convs_;
};

template <typename Scalar>
std::uint64_t Vgg16Features<Scalar>::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Scalar* p, Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const Conv& c : convs_) {
    mix(c.weight.data(), c.weight.size());
    mix(c.bias.data(), c.bias.size());
  }
  return h;
}

// Non-template plumbing (perceptual.cpp).

/// FNV-1a 64-bit hash of a byte range, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Checksum pinned for the surrogate weights produced by `make_surrogate_vgg16`.
extern const char* const kSurrogateWeightsChecksum;

/// Deterministic He-normal VGG-16 feature weights for the first `num_convs`
/// convolutions (7 reaches pool3).
std::map<std::string, NamedTensor> make_surrogate_vgg16(std::uint64_t seed = 16, int num_convs = 7);

/// Serializes extractor weights into the checkpoint container (arch "vgg16-features").
std::string encode_vgg16_weights(const std::map<std::string, NamedTensor>& weights);

/// Loads and checksum-verifies the extractor weights. An empty `expected_checksum`
/// skips verification.
std::shared_ptr<const Vgg16Features<float>> load_vgg16(const std::string& path,
                                                       const std::string& expected_checksum,
                                                       TapLayers taps = {});

}  // namespace streakfix
