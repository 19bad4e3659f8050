#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "streakfix/nn/layers.hpp"

namespace streakfix {

/// Discriminator output: raw per-patch realness scores, shape (N, 1, H/stride, W/stride).
template <typename Scalar>
struct ScoreMap {
  Tensor<Scalar> scores;
  Index stride = 0;
};

enum class Architecture { kGenerator, kDiscriminatorA, kDiscriminatorB };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

/// Common surface for parameter traversal, initialization and checkpointing.
template <typename Scalar>
class Network {
 public:
  virtual ~Network() = default;
  virtual Architecture architecture() const = 0;
  virtual std::vector<Index> widths() const = 0;
  virtual void visit(const nn::ParameterVisitor<Scalar>& f) = 0;
  virtual void visit_buffers(const nn::BufferVisitor<Scalar>& f) = 0;

  void zero_grad() {
    visit([](const std::string&, nn::Parameter<Scalar>& p) { p.zero_grad(); });
  }

  Index parameter_count() {
    Index total = 0;
    visit([&](const std::string&, nn::Parameter<Scalar>& p) { total += p.size(); });
    return total;
  }

  /// Conv weights ~ N(0, 0.02); batch-norm scale 1, shift 0; biases 0.
  /// Deterministic in `seed` (parameters are drawn in visit order).
  virtual void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    visit([&](const std::string& name, nn::Parameter<Scalar>& p) {
      if (name.ends_with(".bn.weight")) {
        p.value.setOnes();
      } else if (name.ends_with(".weight")) {
        for (Index i = 0; i < p.size(); ++i) p.value[i] = Scalar(normal(rng));
      } else {
        p.value.setZero();
      }
      p.zero_grad();
    });
  }
};

inline void require_widths(const std::vector<Index>& widths, std::size_t count, const char* who) {
  if (widths.size() != count) {
    throw ConfigError(std::string(who) + ": expected " + std::to_string(count) + " widths, got " +
                      std::to_string(widths.size()));
  }
  for (Index w : widths)
    if (w <= 0) throw ConfigError(std::string(who) + ": widths must be positive");
}

/// Encoder-decoder generator with four stride-2 encoding blocks, four
/// stride-2 decoding blocks, and channel-concatenating skip connections
/// enc1→dec3, enc2→dec2, enc3→dec1.
///
/// The output head is a 3x3 conv + sigmoid. With `input_skip` the head also
/// sees logit(x) as an extra channel whose centre tap is initialized to 1,
/// so a freshly initialized generator starts near the identity map.
template <typename Scalar>
class Generator final : public Network<Scalar> {
 public:
  static constexpr double kSkipClamp = 1e-3;
  /// With the input skip on, the head starts at 1% of the usual init apart from
  /// the skip's centre tap, so a fresh generator is close to the identity map.
  static constexpr double kResidualInitScale = 0.01;

  explicit Generator(std::vector<Index> widths = {64, 128, 256, 512}, bool input_skip = true)
      : widths_(std::move(widths)), input_skip_(input_skip) {
    require_widths(widths_, 4, "generator");
    const auto& w = widths_;
    enc_[0] = nn::make_encoding_block<Scalar>(1, w[0], 4, 2, 1);
    enc_[1] = nn::make_encoding_block<Scalar>(w[0], w[1], 4, 2, 1);
    enc_[2] = nn::make_encoding_block<Scalar>(w[1], w[2], 4, 2, 1);
    enc_[3] = nn::make_encoding_block<Scalar>(w[2], w[3], 4, 2, 1);
    dec_[0] = nn::make_decoding_block<Scalar>(w[3], w[2]);
    dec_[1] = nn::make_decoding_block<Scalar>(2 * w[2], w[1]);
    dec_[2] = nn::make_decoding_block<Scalar>(2 * w[1], w[0]);
    dec_[3] = nn::make_decoding_block<Scalar>(2 * w[0], w[0]);
    head_ = nn::Conv2d<Scalar>(w[0] + (input_skip_ ? 1 : 0), 1, 3, 1, 1, true);
  }

  Architecture architecture() const override { return Architecture::kGenerator; }
  std::vector<Index> widths() const override { return widths_; }
  bool input_skip() const { return input_skip_; }

  /// x: (N, 1, H, W) with H, W multiples of 16. Returns (N, 1, H, W) in (0, 1).
  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) {
    if (x.c() != 1) throw InputError("generator: expected 1 input channel");
    require_divisible(x.h(), x.w(), 16, "generator");
    input_ = x;
    std::array<Tensor<Scalar>, 4> e;
    e[0] = enc_[0].forward(x, training);
    for (int k = 1; k < 4; ++k) e[k] = enc_[k].forward(e[k - 1], training);
    Tensor<Scalar> d = dec_[0].forward(e[3], training);
    d = dec_[1].forward(concat_channels(d, e[2]), training);
    d = dec_[2].forward(concat_channels(d, e[1]), training);
    d = dec_[3].forward(concat_channels(d, e[0]), training);
    if (input_skip_) d = concat_channels(d, skip_logit(x));
    output_ = nn::sigmoid(head_.forward(d));
    return output_;
  }

  /// Backpropagates dL/d(output); accumulates parameter gradients and returns dL/dx.
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    Tensor<Scalar> g(grad_out.shape());
    g.values() = grad_out.values().cwiseProduct(
        output_.values().unaryExpr([](Scalar y) { return y * (Scalar(1) - y); }));
    Tensor<Scalar> gd = head_.backward(g);
    Tensor<Scalar> grad_skip;
    if (input_skip_) std::tie(gd, grad_skip) = split_channels(gd, widths_[0]);

    const auto& w = widths_;
    std::array<Tensor<Scalar>, 4> ge;
    auto [g3, ge0] = split_channels(dec_[3].backward(gd), w[0]);
    auto [g2, ge1] = split_channels(dec_[2].backward(g3), w[1]);
    auto [g1, ge2] = split_channels(dec_[1].backward(g2), w[2]);
    ge[3] = dec_[0].backward(g1);
    ge[2] = std::move(ge2);
    ge[1] = std::move(ge1);
    ge[0] = std::move(ge0);
    for (int k = 3; k > 0; --k) ge[k - 1] += enc_[k].backward(ge[k]);
    Tensor<Scalar> gx = enc_[0].backward(ge[0]);
    if (input_skip_) {
      const Scalar lo = Scalar(kSkipClamp), hi = Scalar(1 - kSkipClamp);
      for (Index i = 0; i < gx.size(); ++i) {
        const Scalar v = input_.values()[i];
        if (v > lo && v < hi) gx.values()[i] += grad_skip.values()[i] / (v * (Scalar(1) - v));
      }
    }
    return gx;
  }

  void visit(const nn::ParameterVisitor<Scalar>& f) override {
    for (int k = 0; k < 4; ++k) enc_[k].visit("enc" + std::to_string(k + 1), f);
    for (int k = 0; k < 4; ++k) dec_[k].visit("dec" + std::to_string(k + 1), f);
    head_.visit("head", f);
  }
  void visit_buffers(const nn::BufferVisitor<Scalar>& f) override {
    for (int k = 0; k < 4; ++k) enc_[k].visit_buffers("enc" + std::to_string(k + 1), f);
    for (int k = 0; k < 4; ++k) dec_[k].visit_buffers("dec" + std::to_string(k + 1), f);
  }

  void initialize(std::uint64_t seed) override {
    Network<Scalar>::initialize(seed);
    if (input_skip_) {
      // weight layout (1, C, 3, 3): decoder taps first, then the skip channel
      head_.weight.value *= Scalar(kResidualInitScale);
      head_.weight.value[widths_[0] * 9 + 4] = Scalar(1);
    }
  }

 private:
  static Tensor<Scalar> skip_logit(const Tensor<Scalar>& x) {
    Tensor<Scalar> z(x.shape());
    const Scalar lo = Scalar(kSkipClamp), hi = Scalar(1 - kSkipClamp);
    z.values() = x.values().unaryExpr([lo, hi](Scalar v) {
      const Scalar c = std::clamp(v, lo, hi);
      return std::log(c / (Scalar(1) - c));
    });
    return z;
  }

  std::vector<Index> widths_;
  bool input_skip_;
  std::array<nn::EncodingBlock<Scalar>, 4> enc_;
  std::array<nn::DecodingBlock<Scalar>, 4> dec_;
  nn::Conv2d<Scalar> head_;
  Tensor<Scalar> input_;
  Tensor<Scalar> output_;
};

/// 3x3 stride-1 encoding-style block followed by a 1x1 conv to one channel.
template <typename Scalar>
class Classifier {
 public:
  Classifier() = default;
  explicit Classifier(Index channels)
      : block_(nn::make_encoding_block<Scalar>(channels, channels, 3, 1, 1)),
        score_(channels, 1, 1, 1, 0, true) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) {
    return score_.forward(block_.forward(x, training));
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) { return block_.backward(score_.backward(g)); }

  void visit(const std::string& prefix, const nn::ParameterVisitor<Scalar>& f) {
    block_.visit(prefix + ".block", f);
    score_.visit(prefix + ".score", f);
  }
  void visit_buffers(const std::string& prefix, const nn::BufferVisitor<Scalar>& f) {
    block_.visit_buffers(prefix + ".block", f);
  }

 private:
  nn::EncodingBlock<Scalar> block_;
  nn::Conv2d<Scalar> score_;
};

template <typename Scalar>
class Discriminator : public Network<Scalar> {
 public:
  /// Score maps ordered coarse to fine: D₁ (stride 8) first, then D₂ (stride 4) if present.
  virtual std::vector<ScoreMap<Scalar>> forward(const Tensor<Scalar>& x, bool training) = 0;
  /// Takes one gradient per score map (same order as forward); returns dL/dx.
  virtual Tensor<Scalar> backward(const std::vector<Tensor<Scalar>>& grads) = 0;
  virtual std::vector<Index> score_strides() const = 0;
};

/// Conventional patch discriminator: encoding blocks then one classifier.
template <typename Scalar>
class DiscriminatorA final : public Discriminator<Scalar> {
 public:
  explicit DiscriminatorA(std::vector<Index> widths = {64, 128, 256}) : widths_(std::move(widths)) {
    if (widths_.empty()) throw ConfigError("discriminator A: at least one encoding block required");
    require_widths(widths_, widths_.size(), "discriminator A");
    Index in = 1;
    for (Index w : widths_) {
      enc_.push_back(nn::make_encoding_block<Scalar>(in, w, 4, 2, 1));
      in = w;
    }
    classifier_ = Classifier<Scalar>(in);
  }

  Architecture architecture() const override { return Architecture::kDiscriminatorA; }
  std::vector<Index> widths() const override { return widths_; }
  Index stride() const { return Index(1) << enc_.size(); }
  std::vector<Index> score_strides() const override { return {stride()}; }

  std::vector<ScoreMap<Scalar>> forward(const Tensor<Scalar>& x, bool training) override {
    if (x.c() != 1) throw InputError("discriminator A: expected 1 input channel");
    require_divisible(x.h(), x.w(), stride(), "discriminator A");
    Tensor<Scalar> h = x;
    for (auto& block : enc_) h = block.forward(h, training);
    return {ScoreMap<Scalar>{classifier_.forward(h, training), stride()}};
  }

  Tensor<Scalar> backward(const std::vector<Tensor<Scalar>>& grads) override {
    Tensor<Scalar> g = classifier_.backward(grads.at(0));
    for (auto it = enc_.rbegin(); it != enc_.rend(); ++it) g = it->backward(g);
    return g;
  }

  void visit(const nn::ParameterVisitor<Scalar>& f) override {
    for (std::size_t k = 0; k < enc_.size(); ++k) enc_[k].visit("enc" + std::to_string(k + 1), f);
    classifier_.visit("cls", f);
  }
  void visit_buffers(const nn::BufferVisitor<Scalar>& f) override {
    for (std::size_t k = 0; k < enc_.size(); ++k)
      enc_[k].visit_buffers("enc" + std::to_string(k + 1), f);
    classifier_.visit_buffers("cls", f);
  }

 private:
  std::vector<Index> widths_;
  std::vector<nn::EncodingBlock<Scalar>> enc_;
  Classifier<Scalar> classifier_;
};

/// Feature-pyramid discriminator. Three encoding blocks; the top level (stride 8)
/// feeds classifier D₁, and the middle level (stride 4) merged with the upsampled,
/// smoothed top level feeds classifier D₂.
template <typename Scalar>
class DiscriminatorB final : public Discriminator<Scalar> {
 public:
  explicit DiscriminatorB(std::vector<Index> widths = {64, 128, 256}, Index pyramid_channels = 128)
      : widths_(std::move(widths)), pyramid_(pyramid_channels) {
    require_widths(widths_, 3, "discriminator B");
    if (pyramid_ <= 0) throw ConfigError("discriminator B: pyramid channels must be positive");
    enc_[0] = nn::make_encoding_block<Scalar>(1, widths_[0], 4, 2, 1);
    enc_[1] = nn::make_encoding_block<Scalar>(widths_[0], widths_[1], 4, 2, 1);
    enc_[2] = nn::make_encoding_block<Scalar>(widths_[1], widths_[2], 4, 2, 1);
    lateral_mid_ = nn::Conv2d<Scalar>(widths_[1], pyramid_, 1, 1, 0, true);
    lateral_top_ = nn::Conv2d<Scalar>(widths_[2], pyramid_, 1, 1, 0, true);
    smooth_ = nn::Conv2d<Scalar>(pyramid_, pyramid_, 3, 1, 1, true);
    cls_top_ = Classifier<Scalar>(pyramid_);
    cls_mid_ = Classifier<Scalar>(pyramid_);
  }

  Architecture architecture() const override { return Architecture::kDiscriminatorB; }
  std::vector<Index> widths() const override {
    auto w = widths_;
    w.push_back(pyramid_);
    return w;
  }
  std::vector<Index> score_strides() const override { return {8, 4}; }

  std::vector<ScoreMap<Scalar>> forward(const Tensor<Scalar>& x, bool training) override {
    if (x.c() != 1) throw InputError("discriminator B: expected 1 input channel");
    require_divisible(x.h(), x.w(), 8, "discriminator B");
    const Tensor<Scalar> e1 = enc_[0].forward(x, training);
    const Tensor<Scalar> e2 = enc_[1].forward(e1, training);
    const Tensor<Scalar> e3 = enc_[2].forward(e2, training);
    const Tensor<Scalar> top = lateral_top_.forward(e3);
    Tensor<Scalar> merged = lateral_mid_.forward(e2);
    merged += smooth_.forward(nn::upsample_nearest2x(top));
    return {ScoreMap<Scalar>{cls_top_.forward(top, training), 8},
            ScoreMap<Scalar>{cls_mid_.forward(merged, training), 4}};
  }

  Tensor<Scalar> backward(const std::vector<Tensor<Scalar>>& grads) override {
    const Tensor<Scalar> g_merged = cls_mid_.backward(grads.at(1));
    Tensor<Scalar> g_e2 = lateral_mid_.backward(g_merged);
    Tensor<Scalar> g_top = nn::upsample_nearest2x_grad(smooth_.backward(g_merged));
    g_top += cls_top_.backward(grads.at(0));
    g_e2 += enc_[2].backward(lateral_top_.backward(g_top));
    return enc_[0].backward(enc_[1].backward(g_e2));
  }

  void visit(const nn::ParameterVisitor<Scalar>& f) override {
    for (int k = 0; k < 3; ++k) enc_[k].visit("enc" + std::to_string(k + 1), f);
    lateral_mid_.visit("lateral2", f);
    lateral_top_.visit("lateral3", f);
    smooth_.visit("upsample.smooth", f);
    cls_top_.visit("cls1", f);
    cls_mid_.visit("cls2", f);
  }
  void visit_buffers(const nn::BufferVisitor<Scalar>& f) override {
    for (int k = 0; k < 3; ++k) enc_[k].visit_buffers("enc" + std::to_string(k + 1), f);
    cls_top_.visit_buffers("cls1", f);
    cls_mid_.visit_buffers("cls2", f);
  }

  /// Top-level lateral path; exposed for pyramid-merge tests.
  nn::Conv2d<Scalar>& lateral_top() { return lateral_top_; }

 private:
  std::vector<Index> widths_;
  Index pyramid_;
  std::array<nn::EncodingBlock<Scalar>, 3> enc_;
  nn::Conv2d<Scalar> lateral_mid_, lateral_top_, smooth_;
  Classifier<Scalar> cls_top_, cls_mid_;
};

/// Builds a discriminator from its architecture tag and widths
/// (Discriminator B takes an optional fourth width: pyramid channels).
template <typename Scalar>
std::unique_ptr<Discriminator<Scalar>> make_discriminator(Architecture arch,
                                                          std::vector<Index> widths) {
  switch (arch) {
    case Architecture::kDiscriminatorA:
      return std::make_unique<DiscriminatorA<Scalar>>(std::move(widths));
    case Architecture::kDiscriminatorB: {
      Index pyramid = 128;
      if (widths.size() == 4) {
        pyramid = widths.back();
        widths.pop_back();
      }
      return std::make_unique<DiscriminatorB<Scalar>>(std::move(widths), pyramid);
    }
    default:
      throw ConfigError("make_discriminator: not a discriminator architecture");
  }
}

}  // namespace streakfix
