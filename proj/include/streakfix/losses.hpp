#pragma once

#include <cmath>
#include <vector>

#include "streakfix/networks.hpp"
#include "streakfix/perceptual.hpp"

namespace streakfix {

/// Per-location adversarial weights Λ, shape (N, 1, h, w); each sample's map has mean 1.
template <typename Scalar>
struct FocusMap {
  Tensor<Scalar> weights;
  Index stride = 0;

  static FocusMap ones(const Shape4& score_shape, Index stride) {
    return {Tensor<Scalar>::constant(score_shape, Scalar(1)), stride};
  }
};

/// Weights between the adversarial, MSE and perceptual terms.
struct LossWeights {
  double lambda_a = 1.0;
  double lambda_m = 100.0;
  double lambda_p = 10.0;
};

/// Loss value together with its gradient w.r.t. one input.
template <typename Scalar>
struct LossGrad {
  Scalar value = 0;
  Tensor<Scalar> grad;
};

inline constexpr double kFocusDegenerateThreshold = 1e-12;

/// Focus map from two feature maps of identical shape (N, C, h, w).
///
/// λ_mn is the channel-wise Euclidean distance between the feature vectors at
/// (m, n), divided by its mean over the sample's locations. A sample whose mean
/// distance is below 1e-12 gets an all-ones map.
template <typename Scalar>
Tensor<Scalar> focus_weights(const Tensor<Scalar>& dense_features,
                             const Tensor<Scalar>& generated_features) {
  dense_features.require_same_shape(generated_features, "focus_map");
  Tensor<Scalar> lambda(dense_features.n(), 1, dense_features.h(), dense_features.w());
  for (Index n = 0; n < lambda.n(); ++n) {
    auto dist = lambda.sample(n);
    dist = (dense_features.sample(n) - generated_features.sample(n)).colwise().norm();
    const Scalar z = dist.mean();
    if (!(double(z) >= kFocusDegenerateThreshold)) {
      dist.setOnes();
    } else {
      dist /= z;
    }
  }
  return lambda;
}

/// Focus map between a dense-view batch and the generator output at one tap.
template <typename Scalar>
FocusMap<Scalar> focus_map(const FeatureExtractor<Scalar>& extractor, const Tensor<Scalar>& dense,
                           const Tensor<Scalar>& generated, TapName tap) {
  if (tap == TapName::kI) throw ConfigError("focus_map: tap must be J1 or J2");
  dense.require_same_shape(generated, "focus_map");
  return {focus_weights(extractor.extract(dense, tap), extractor.extract(generated, tap)),
          extractor.tap(tap).stride};
}

/// mean over all elements of [Λ ⊙ (scores − target)]², with its gradient.
template <typename Scalar>
LossGrad<Scalar> weighted_lsgan_term(const Tensor<Scalar>& scores, Scalar target,
                                     const Tensor<Scalar>& lambda) {
  scores.require_same_shape(lambda, "lsgan loss (score map vs focus map)");
  const Scalar count = Scalar(scores.size());
  const auto residual = (scores.values().array() - target) * lambda.values().array();
  LossGrad<Scalar> out;
  out.value = residual.square().sum() / count;
  out.grad = Tensor<Scalar>(scores.shape());
  out.grad.values() = (Scalar(2) / count) * (residual * lambda.values().array()).matrix();
  return out;
}

/// Discriminator LSGAN loss: real scores pulled to 1, fake scores to 0, both weighted by Λ.
template <typename Scalar>
Scalar lsgan_d_loss(const Tensor<Scalar>& real, const Tensor<Scalar>& fake,
                    const Tensor<Scalar>& lambda) {
  real.require_same_shape(fake, "lsgan_d_loss");
  return weighted_lsgan_term(real, Scalar(1), lambda).value +
         weighted_lsgan_term(fake, Scalar(0), lambda).value;
}

template <typename Scalar>
Scalar lsgan_g_loss(const Tensor<Scalar>& fake, const Tensor<Scalar>& lambda) {
  return weighted_lsgan_term(fake, Scalar(1), lambda).value;
}

template <typename Scalar>
struct AdversarialLosses {
  Scalar d_loss = 0;
  Scalar g_loss = 0;
};

inline void require_matching_stride(Index score_stride, Index focus_stride) {
  if (score_stride != focus_stride) {
    throw ConfigError("focus map stride " + std::to_string(focus_stride) +
                      " does not match score map stride " + std::to_string(score_stride));
  }
}

/// Sum of per-scale LSGAN losses, scale i weighted by its own Λᵢ.
template <typename Scalar>
AdversarialLosses<Scalar> multiscale_adv_losses(const std::vector<ScoreMap<Scalar>>& real,
                                                const std::vector<ScoreMap<Scalar>>& fake,
                                                const std::vector<FocusMap<Scalar>>& lambdas) {
  if (real.size() != fake.size() || real.size() != lambdas.size()) {
    throw ConfigError("multiscale_adv_losses: need one real map, fake map and focus map per scale");
  }
  AdversarialLosses<Scalar> out;
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i].stride != fake[i].stride) {
      throw ConfigError("multiscale_adv_losses: real/fake stride mismatch");
    }
    require_matching_stride(real[i].stride, lambdas[i].stride);
    out.d_loss += lsgan_d_loss(real[i].scores, fake[i].scores, lambdas[i].weights);
    out.g_loss += lsgan_g_loss(fake[i].scores, lambdas[i].weights);
  }
  return out;
}

/// Mean absolute feature difference, with gradient w.r.t. `generated`.
template <typename Scalar>
LossGrad<Scalar> l1_feature_loss(const Tensor<Scalar>& dense, const Tensor<Scalar>& generated) {
  dense.require_same_shape(generated, "perceptual_loss");
  const Scalar count = Scalar(dense.size());
  const auto diff = (generated.values() - dense.values()).array();
  LossGrad<Scalar> out;
  out.value = diff.abs().sum() / count;
  out.grad = Tensor<Scalar>(dense.shape());
  out.grad.values() = (diff.sign() / count).matrix();
  return out;
}

/// Perceptual loss at the extractor's TAP_I.
template <typename Scalar>
Scalar perceptual_loss(const FeatureExtractor<Scalar>& extractor, const Tensor<Scalar>& dense,
                       const Tensor<Scalar>& generated) {
  dense.require_same_shape(generated, "perceptual_loss");
  return l1_feature_loss(extractor.extract(dense, TapName::kI),
                         extractor.extract(generated, TapName::kI))
      .value;
}

template <typename Scalar>
LossGrad<Scalar> mse_loss_grad(const Tensor<Scalar>& dense, const Tensor<Scalar>& generated) {
  dense.require_same_shape(generated, "mse_loss");
  const Scalar count = Scalar(dense.size());
  const auto diff = (generated.values() - dense.values()).array();
  LossGrad<Scalar> out;
  out.value = diff.square().sum() / count;
  out.grad = Tensor<Scalar>(dense.shape());
  out.grad.values() = (Scalar(2) * diff / count).matrix();
  return out;
}

template <typename Scalar>
Scalar mse_loss(const Tensor<Scalar>& dense, const Tensor<Scalar>& generated) {
  return mse_loss_grad(dense, generated).value;
}

}  // namespace streakfix
