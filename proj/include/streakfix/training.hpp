#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "streakfix/checkpoint.hpp"
#include "streakfix/dataset.hpp"
#include "streakfix/losses.hpp"
#include "streakfix/optim.hpp"

namespace streakfix {

/// The five compared models.
enum class Variant { kBaselineMse, kBaselinePerceptual, kOursFocus, kOursFpn, kOursFocusFpn };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
const std::vector<Variant>& all_variants();

enum class Regularizer { kMse, kPerceptual };

/// What a variant switches on.
struct VariantTraits {
  Architecture discriminator;
  bool focus;
  Regularizer regularizer;
};
VariantTraits traits(Variant v);

struct TrainConfig {
  Variant variant = Variant::kOursFocusFpn;
  AdamOptions adam{};
  int epochs = 50;
  int batch_size = 4;
  int folds = 5;
  std::uint64_t seed = 0;
  LossWeights weights{};
  int patch_size = 256;
  int train_patches = 2000;
  int d_steps_per_g = 1;
  bool deterministic = false;
  std::vector<Index> generator_widths{64, 128, 256, 512};
  std::vector<Index> discriminator_widths{64, 128, 256};
  Index pyramid_channels = 128;
  bool generator_input_skip = true;

  void validate() const;
};

/// Phantom-level partition into `folds` groups (sizes differ by at most one).
std::vector<std::vector<std::string>> build_folds(const std::vector<std::string>& phantom_ids,
                                                  int folds, std::uint64_t seed);

/// Losses of one training step. Disabled components are empty, not zero.
template <typename Scalar>
struct StepLosses {
  Scalar adv_d = 0;
  Scalar adv_g = 0;
  std::optional<Scalar> perceptual;
  std::optional<Scalar> mse;
  /// Max of Λ per scale, present only when the focus map is active.
  std::vector<Scalar> focus_max;
};

template <typename Scalar>
struct GeneratorTerms {
  Scalar adv_g = 0;
  std::optional<Scalar> perceptual;
  std::optional<Scalar> mse;
  Scalar total = 0;
  Tensor<Scalar> grad_fake;  // d total / d fake, when requested
};

template <typename Scalar>
bool all_finite(const StepLosses<Scalar>& l) {
  auto ok = [](std::optional<Scalar> v) { return !v || std::isfinite(double(*v)); };
  return std::isfinite(double(l.adv_d)) && std::isfinite(double(l.adv_g)) && ok(l.perceptual) &&
         ok(l.mse);
}

/// Generator objective λ_a·Σᵢ adv_gᵢ + (λ_p·perceptual | λ_m·mse) evaluated on
/// a generator output `fake`. Λ is taken as given (no gradient through it).
///
/// `fake_pass` / `dense_pass` must hold TAP_I when the regularizer is perceptual,
/// and `fake_pass` must have been kept for backward if `with_grad`. The
/// discriminator's parameter gradients are left polluted; callers zero them.
template <typename Scalar>
GeneratorTerms<Scalar> generator_terms(Discriminator<Scalar>& disc,
                                       const FeatureExtractor<Scalar>* extractor,
                                       const Tensor<Scalar>& fake, const Tensor<Scalar>& dense,
                                       const FeaturePass<Scalar>* fake_pass,
                                       const FeaturePass<Scalar>* dense_pass,
                                       const std::vector<FocusMap<Scalar>>& lambdas,
                                       const LossWeights& w, Regularizer reg, bool with_grad) {
  GeneratorTerms<Scalar> out;
  const auto scores = disc.forward(fake, true);
  if (scores.size() != lambdas.size()) throw ConfigError("one focus map per score map required");
  std::vector<Tensor<Scalar>> score_grads;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require_matching_stride(scores[i].stride, lambdas[i].stride);
    auto term = weighted_lsgan_term(scores[i].scores, Scalar(1), lambdas[i].weights);
    out.adv_g += term.value;
    term.grad.values() *= Scalar(w.lambda_a);
    score_grads.push_back(std::move(term.grad));
  }
  out.total = Scalar(w.lambda_a) * out.adv_g;
  if (with_grad) out.grad_fake = disc.backward(score_grads);

  if (reg == Regularizer::kPerceptual) {
    if (!extractor || !fake_pass || !dense_pass) {
      throw ConfigError("perceptual regularizer needs an extractor and feature passes");
    }
    auto term = l1_feature_loss(dense_pass->at(TapName::kI), fake_pass->at(TapName::kI));
    out.perceptual = term.value;
    out.total += Scalar(w.lambda_p) * term.value;
    if (with_grad) {
      term.grad.values() *= Scalar(w.lambda_p);
      out.grad_fake += extractor->backward(*fake_pass, TapName::kI, term.grad);
    }
  } else {
    auto term = mse_loss_grad(dense, fake);
    out.mse = term.value;
    out.total += Scalar(w.lambda_m) * term.value;
    if (with_grad) {
      term.grad.values() *= Scalar(w.lambda_m);
      out.grad_fake += term.grad;
    }
  }
  return out;
}

/// Owns G, D and their optimizers and performs alternating D/G updates.
template <typename Scalar>
class AdversarialTrainer {
 public:
  AdversarialTrainer(const TrainConfig& config,
                     std::shared_ptr<const FeatureExtractor<Scalar>> extractor)
      : config_(config), traits_(traits(config.variant)), extractor_(std::move(extractor)) {
    config_.validate();
    if (needs_extractor() && !extractor_) {
      throw ConfigError("variant " + to_string(config_.variant) + " needs the perceptual extractor");
    }
    generator_ = std::make_unique<Generator<Scalar>>(config_.generator_widths,
                                                     config_.generator_input_skip);
    auto dw = config_.discriminator_widths;
    if (traits_.discriminator == Architecture::kDiscriminatorB) dw.push_back(config_.pyramid_channels);
    discriminator_ = make_discriminator<Scalar>(traits_.discriminator, dw);
    generator_->initialize(derive_seed(config_.seed, 1));
    discriminator_->initialize(derive_seed(config_.seed, 2));
    g_opt_ = std::make_unique<Adam<Scalar>>(*generator_, config_.adam);
    d_opt_ = std::make_unique<Adam<Scalar>>(*discriminator_, config_.adam);
    if (traits_.focus) {
      const auto strides = discriminator_->score_strides();
      const TapName focus_taps[2] = {TapName::kJ1, TapName::kJ2};
      for (std::size_t i = 0; i < strides.size(); ++i) {
        require_matching_stride(strides[i], extractor_->tap(focus_taps[i]).stride);
      }
    }
  }

  bool needs_extractor() const {
    return traits_.focus || traits_.regularizer == Regularizer::kPerceptual;
  }

  Generator<Scalar>& generator() { return *generator_; }
  Discriminator<Scalar>& discriminator() { return *discriminator_; }
  const TrainConfig& config() const { return config_; }
  int steps() const { return static_cast<int>(g_opt_->steps()); }

  /// Called after the D update(s) and before the G update of every step.
  void set_between_updates(std::function<void()> hook) { between_updates_ = std::move(hook); }

  /// Taps the extractor must produce for this variant.
  std::vector<TapName> taps() const {
    std::vector<TapName> t;
    if (traits_.regularizer == Regularizer::kPerceptual) t.push_back(TapName::kI);
    if (traits_.focus) {
      t.push_back(TapName::kJ1);
      if (traits_.discriminator == Architecture::kDiscriminatorB) t.push_back(TapName::kJ2);
    }
    return t;
  }

  /// One D update (or `d_steps_per_g` of them) followed by one G update.
  /// Throws NumericalError before applying an update whose loss is non-finite.
  StepLosses<Scalar> step(const Tensor<Scalar>& sparse, const Tensor<Scalar>& dense) {
    sparse.require_same_shape(dense, "training step");
    StepLosses<Scalar> losses;
    const Tensor<Scalar> fake = generator_->forward(sparse, true);

    FeaturePass<Scalar> dense_pass, fake_pass;
    const auto tap_list = taps();
    if (!tap_list.empty()) {
      dense_pass = extractor_->forward(dense, tap_list, false);
      fake_pass = extractor_->forward(fake, tap_list,
                                      traits_.regularizer == Regularizer::kPerceptual);
    }

    std::vector<FocusMap<Scalar>> lambdas;
    for (int k = 0; k < config_.d_steps_per_g; ++k) {
      discriminator_->zero_grad();
      const auto real = discriminator_->forward(dense, true);
      if (lambdas.empty()) lambdas = make_lambdas(real, dense_pass, fake_pass);
      std::vector<Tensor<Scalar>> grads;
      Scalar d_loss = 0;
      for (std::size_t i = 0; i < real.size(); ++i) {
        auto term = weighted_lsgan_term(real[i].scores, Scalar(1), lambdas[i].weights);
        d_loss += term.value;
        grads.push_back(std::move(term.grad));
      }
      discriminator_->backward(grads);
      const auto fake_scores = discriminator_->forward(fake, true);
      grads.clear();
      for (std::size_t i = 0; i < fake_scores.size(); ++i) {
        auto term = weighted_lsgan_term(fake_scores[i].scores, Scalar(0), lambdas[i].weights);
        d_loss += term.value;
        grads.push_back(std::move(term.grad));
      }
      discriminator_->backward(grads);
      losses.adv_d = d_loss;
      if (!std::isfinite(double(d_loss))) {
        throw NumericalError("non-finite discriminator loss", diagnostics(losses));
      }
      d_opt_->step();
    }
    if (between_updates_) between_updates_();
    generator_->zero_grad();
    auto terms = generator_terms(*discriminator_, extractor_.get(), fake, dense,
                                 tap_list.empty() ? nullptr : &fake_pass,
                                 tap_list.empty() ? nullptr : &dense_pass, lambdas,
                                 config_.weights, traits_.regularizer, true);
    discriminator_->zero_grad();
    losses.adv_g = terms.adv_g;
    losses.perceptual = terms.perceptual;
    losses.mse = terms.mse;
    if (traits_.focus)
      for (const auto& l : lambdas) losses.focus_max.push_back(l.weights.values().maxCoeff());
    if (!all_finite(losses)) throw NumericalError("non-finite generator loss", diagnostics(losses));
    generator_->backward(terms.grad_fake);
    g_opt_->step();
    return losses;
  }

 private:
  static std::string diagnostics(const StepLosses<Scalar>& l) {
    auto num = [](double v) { return std::isfinite(v) ? std::to_string(v) : "\"" + std::to_string(v) + "\""; };
    std::string s = "{\"adv_d\":" + num(double(l.adv_d)) + ",\"adv_g\":" + num(double(l.adv_g));
    if (l.perceptual) s += ",\"perceptual\":" + num(double(*l.perceptual));
    if (l.mse) s += ",\"mse\":" + num(double(*l.mse));
    return s + "}";
  }

  std::vector<FocusMap<Scalar>> make_lambdas(const std::vector<ScoreMap<Scalar>>& scores,
                                             const FeaturePass<Scalar>& dense_pass,
                                             const FeaturePass<Scalar>& fake_pass) const {
    std::vector<FocusMap<Scalar>> out;
    const TapName focus_taps[2] = {TapName::kJ1, TapName::kJ2};
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (traits_.focus) {
        FocusMap<Scalar> m{focus_weights(dense_pass.at(focus_taps[i]), fake_pass.at(focus_taps[i])),
                           extractor_->tap(focus_taps[i]).stride};
        scores[i].scores.require_same_shape(m.weights, "focus map vs score map");
        out.push_back(std::move(m));
      } else {
        out.push_back(FocusMap<Scalar>::ones(scores[i].scores.shape(), scores[i].stride));
      }
    }
    return out;
  }

  TrainConfig config_;
  VariantTraits traits_;
  std::shared_ptr<const FeatureExtractor<Scalar>> extractor_;
  std::unique_ptr<Generator<Scalar>> generator_;
  std::unique_ptr<Discriminator<Scalar>> discriminator_;
  std::unique_ptr<Adam<Scalar>> g_opt_, d_opt_;
  std::function<void()> between_updates_;
};

/// Result of training one fold.
struct FoldResult {
  std::string generator_checkpoint;  // latest generator checkpoint
  std::string log_path;
  std::vector<std::string> held_out_phantoms;
  int steps = 0;
};

/// Training patches for fold `fold_id`: `config.train_patches` crops drawn
/// round-robin from the slices of the training phantoms.
std::vector<PatchPair> training_patches(const Dataset& dataset,
                                        const std::vector<std::string>& train_phantoms,
                                        const TrainConfig& config);

/// Trains one cross-validation fold. Writes per-epoch checkpoints
/// (`generator_epoch_NNN.ckpt`, `discriminator_epoch_NNN.ckpt`, `generator.ckpt`)
/// and a JSON-lines step log (`train_log.jsonl`) under `out_dir`.
FoldResult train_fold(const TrainConfig& config, const Dataset& dataset, int fold_id,
                      std::shared_ptr<const FeatureExtractor<float>> extractor,
                      const std::string& out_dir);

/// Slice-by-slice generator inference in evaluation mode.
std::vector<Image> infer(Generator<float>& generator, const std::vector<Image>& images);
std::vector<Image> infer(const Checkpoint& checkpoint, const std::vector<Image>& images);

}  // namespace streakfix
