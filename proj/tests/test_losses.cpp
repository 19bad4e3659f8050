#include "doctest.h"
#include "oracles.hpp"
#include "streakfix/losses.hpp"
#include "streakfix/metrics.hpp"
#include "streakfix/training.hpp"

using namespace streakfix;

namespace {

Tensor<double> full(Shape4 s, double v) { return Tensor<double>::constant(s, v); }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("discriminator LSGAN closed forms") {
    const Shape4 s{2, 1, 4, 4};
    CHECK(lsgan_d_loss(full(s, 1), full(s, 0), full(s, 1)) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(lsgan_d_loss(full(s, 0.5), full(s, 0.5), full(s, 1)) == doctest::Approx(0.5).epsilon(1e-10));
    std::mt19937_64 rng(1);
    const auto real = oracle::random_tensor<double>(rng, 2, 1, 4, 4);
    const auto fake = oracle::random_tensor<double>(rng, 2, 1, 4, 4);
    const auto lam = oracle::random_tensor<double>(rng, 2, 1, 4, 4, 0, 2);
    Tensor<double> lam2 = lam;
    lam2.values() *= 2.0;
    CHECK(lsgan_d_loss(real, fake, lam2) ==
          doctest::Approx(4.0 * lsgan_d_loss(real, fake, lam)).epsilon(1e-10));
    CHECK_THROWS_AS(lsgan_d_loss(real, full({2, 1, 4, 3}, 0), lam), InputError);
  }

  TEST_CASE("generator LSGAN closed forms") {
    const Shape4 s{1, 1, 3, 5};
    CHECK(lsgan_g_loss(full(s, 1), full(s, 1)) == 0.0);
    CHECK(lsgan_g_loss(full(s, 0.5), full(s, 1)) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(lsgan_g_loss(full(s, 0), full(s, 2)) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK_THROWS_AS(lsgan_g_loss(full(s, 0), full({1, 1, 5, 3}, 1)), InputError);
  }

  TEST_CASE("LSGAN gradient matches finite differences") {
    std::mt19937_64 rng(2);
    auto scores = oracle::random_tensor<double>(rng, 1, 1, 3, 3);
    const auto lam = oracle::random_tensor<double>(rng, 1, 1, 3, 3, 0, 2);
    const auto g = weighted_lsgan_term(scores, 1.0, lam).grad;
    for (Index i = 0; i < scores.size(); ++i) {
      const double saved = scores.values()[i];
      scores.values()[i] = saved + 1e-6;
      const double up = weighted_lsgan_term(scores, 1.0, lam).value;
      scores.values()[i] = saved - 1e-6;
      const double down = weighted_lsgan_term(scores, 1.0, lam).value;
      scores.values()[i] = saved;
      CHECK(g.values()[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6));
    }
  }

  TEST_CASE("focus map") {
    const StubExtractor<double> stub;
    SUBCASE("identical images fall back to all ones") {
      const auto x = full({2, 1, 4, 4}, 0.3);
      const auto m = focus_map(stub, x, x, TapName::kJ1);
      CHECK(m.weights.values().minCoeff() == 1.0);
      CHECK(m.weights.values().maxCoeff() == 1.0);
    }
    SUBCASE("a single differing location receives weight N") {
      const auto x = full({1, 1, 5, 4}, 0.3);
      auto y = x;
      y(0, 0, 2, 1) = 0.8;
      const auto m = focus_map(stub, x, y, TapName::kJ2);
      for (Index r = 0; r < 5; ++r)
        for (Index c = 0; c < 4; ++c)
          CHECK(m.weights(0, 0, r, c) == doctest::Approx(r == 2 && c == 1 ? 20.0 : 0.0).epsilon(1e-12));
    }
    SUBCASE("channel norm is Euclidean") {
      Tensor<double> a(1, 2, 1, 2), b(1, 2, 1, 2);
      b(0, 0, 0, 0) = 3;
      b(0, 1, 0, 0) = 4;  // distance 5
      b(0, 0, 0, 1) = 1;  // distance 1
      const auto w = focus_weights(a, b);
      CHECK(w(0, 0, 0, 0) == doctest::Approx(5.0 / 3.0));
      CHECK(w(0, 0, 0, 1) == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("each sample is normalized on its own") {
      std::mt19937_64 rng(3);
      const auto a = oracle::random_tensor<double>(rng, 3, 4, 6, 6);
      auto b = a;
      b.values().head(4 * 36) += oracle::random_tensor<double>(rng, 1, 4, 6, 6).values();
      const auto w = focus_weights(a, b);
      CHECK(w.sample(0).mean() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(w.sample(1).minCoeff() == 1.0);
      CHECK(w.sample(2).maxCoeff() == 1.0);
    }
    SUBCASE("TAP_I is rejected") {
      const auto x = full({1, 1, 4, 4}, 0.3);
      CHECK_THROWS_AS(focus_map(stub, x, x, TapName::kI), ConfigError);
    }
    SUBCASE("random inputs: mean 1, non-negative") {
      std::mt19937_64 rng(4);
      for (int trial = 0; trial < 50; ++trial) {
        const auto a = oracle::random_tensor<float>(rng, 2, 3, 8, 8);
        const auto b = oracle::random_tensor<float>(rng, 2, 3, 8, 8);
        const auto w = focus_weights(a, b);
        for (Index n = 0; n < 2; ++n) {
          CHECK(std::abs(double(w.sample(n).mean()) - 1.0) <= 1e-5);
          CHECK(w.sample(n).minCoeff() >= 0.0f);
        }
      }
    }
  }

  TEST_CASE("down-weighting below the mean") {
    std::mt19937_64 rng(5);
    const auto a = oracle::random_tensor<double>(rng, 1, 3, 6, 6);
    const auto b = oracle::random_tensor<double>(rng, 1, 3, 6, 6);
    const auto lam = focus_weights(a, b);
    const auto fake = oracle::random_tensor<double>(rng, 1, 1, 6, 6);
    Index below = 0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam.values()[i] >= 1.0) continue;
      ++below;
      const double r = fake.values()[i] - 1.0;
      CHECK(std::pow(lam.values()[i] * r, 2) < r * r);
    }
    CHECK(below > 0);
  }

  TEST_CASE("multiscale sums") {
    const Shape4 s1{1, 1, 2, 2}, s2{1, 1, 4, 4};
    const std::vector<ScoreMap<double>> real{{full(s1, 1), 8}, {full(s2, 1), 4}};
    const std::vector<ScoreMap<double>> fake{{full(s1, 0), 8}, {full(s2, 0), 4}};
    const std::vector<FocusMap<double>> ones{FocusMap<double>::ones(s1, 8), FocusMap<double>::ones(s2, 4)};
    const auto l = multiscale_adv_losses(real, fake, ones);
    CHECK(l.d_loss == doctest::Approx(0.0));
    CHECK(l.g_loss == doctest::Approx(2.0));

    std::mt19937_64 rng(6);
    std::vector<ScoreMap<double>> r2, f2;
    std::vector<FocusMap<double>> lam;
    for (auto [shape, stride] : {std::pair{s1, Index(8)}, std::pair{s2, Index(4)}}) {
      r2.push_back({oracle::random_tensor<double>(rng, 1, 1, shape.h, shape.w), stride});
      f2.push_back({oracle::random_tensor<double>(rng, 1, 1, shape.h, shape.w), stride});
      lam.push_back({oracle::random_tensor<double>(rng, 1, 1, shape.h, shape.w, 0, 2), stride});
    }
    const auto sum = multiscale_adv_losses(r2, f2, lam);
    double d = 0, g = 0;
    for (int i = 0; i < 2; ++i) {
      d += lsgan_d_loss(r2[i].scores, f2[i].scores, lam[i].weights);
      g += lsgan_g_loss(f2[i].scores, lam[i].weights);
    }
    CHECK(sum.d_loss == doctest::Approx(d).epsilon(1e-12));
    CHECK(sum.g_loss == doctest::Approx(g).epsilon(1e-12));

    auto swapped = lam;
    std::swap(swapped[0].stride, swapped[1].stride);
    CHECK_THROWS_AS(multiscale_adv_losses(r2, f2, swapped), ConfigError);
  }

  TEST_CASE("perceptual loss with the stub extractor") {
    const StubExtractor<double> stub;
    std::mt19937_64 rng(7);
    const auto a = oracle::random_tensor<double>(rng, 2, 1, 8, 8);
    const auto b = oracle::random_tensor<double>(rng, 2, 1, 8, 8);
    CHECK(perceptual_loss(stub, a, a) == 0.0);
    CHECK(perceptual_loss(stub, a, b) == doctest::Approx((a.values() - b.values()).cwiseAbs().mean()).epsilon(1e-12));
    CHECK(perceptual_loss(stub, a, b) == perceptual_loss(stub, b, a));
  }

  TEST_CASE("MSE") {
    const auto zero = full({1, 1, 4, 4}, 0), half = full({1, 1, 4, 4}, 0.5);
    CHECK(mse_loss(zero, zero) == 0.0);
    CHECK(mse_loss(zero, half) == doctest::Approx(0.25));
    std::mt19937_64 rng(8);
    const auto a = oracle::random_image(rng, 12, 12), b = oracle::random_image(rng, 12, 12);
    const double m = mse_loss(to_batch<double>({a}), to_batch<double>({b}));
    CHECK(m == doctest::Approx(std::pow(rmse(a, b), 2)).epsilon(1e-6));
    CHECK_THROWS_AS(mse_loss(zero, full({1, 1, 4, 5}, 0)), InputError);
  }

  TEST_CASE("no gradient flows through the focus map") {
    // Λ built from features the generator output does not otherwise reach: the
    // generator gradient must equal the one obtained with the same Λ frozen.
    DiscriminatorA<double> d({2, 2, 2});
    d.initialize(3);
    std::mt19937_64 rng(9);
    const auto fake = oracle::random_tensor<double>(rng, 1, 1, 16, 16);
    const auto dense = oracle::random_tensor<double>(rng, 1, 1, 16, 16);
    const StubExtractor<double> stub;
    const auto fp = stub.forward(fake, {TapName::kI}, true);
    const auto dp = stub.forward(dense, {TapName::kI}, false);
    const auto feat_a = oracle::random_tensor<double>(rng, 1, 3, 2, 2);
    auto feat_b = oracle::random_tensor<double>(rng, 1, 3, 2, 2);
    const std::vector<FocusMap<double>> lam1{{focus_weights(feat_a, feat_b), 8}};
    const auto t1 = generator_terms<double>(d, &stub, fake, dense, &fp, &dp, lam1, LossWeights{},
                                            Regularizer::kPerceptual, true);
    const std::vector<FocusMap<double>> frozen{{lam1[0].weights, 8}};
    const auto t2 = generator_terms<double>(d, &stub, fake, dense, &fp, &dp, frozen, LossWeights{},
                                            Regularizer::kPerceptual, true);
    CHECK(t1.grad_fake.values() == t2.grad_fake.values());
    feat_b.values() *= 3.0;
    feat_b.values().array() += 0.1;
    const std::vector<FocusMap<double>> lam3{{focus_weights(feat_a, feat_b), 8}};
    const auto t3 = generator_terms<double>(d, &stub, fake, dense, &fp, &dp, lam3, LossWeights{},
                                            Regularizer::kPerceptual, true);
    CHECK(t3.adv_g != doctest::Approx(t1.adv_g));
  }

  TEST_CASE("generator objective composition") {
    DiscriminatorA<double> d({2, 2, 2});
    d.initialize(4);
    std::mt19937_64 rng(10);
    const auto fake = oracle::random_tensor<double>(rng, 2, 1, 16, 16);
    const auto dense = oracle::random_tensor<double>(rng, 2, 1, 16, 16);
    const std::vector<FocusMap<double>> ones{FocusMap<double>::ones({2, 1, 2, 2}, 8)};
    const LossWeights w{};
    const auto mse_terms = generator_terms<double>(d, nullptr, fake, dense, nullptr, nullptr, ones, w,
                                                   Regularizer::kMse, false);
    CHECK(mse_terms.mse.has_value());
    CHECK_FALSE(mse_terms.perceptual.has_value());
    CHECK(mse_terms.total == doctest::Approx(w.lambda_a * mse_terms.adv_g + w.lambda_m * *mse_terms.mse));
    CHECK_THROWS_AS(generator_terms<double>(d, nullptr, fake, dense, nullptr, nullptr, ones, w,
                                            Regularizer::kPerceptual, false),
                    ConfigError);
    const std::vector<FocusMap<double>> wrong{FocusMap<double>::ones({2, 1, 2, 2}, 4)};
    CHECK_THROWS_AS(generator_terms<double>(d, nullptr, fake, dense, nullptr, nullptr, wrong, w,
                                            Regularizer::kMse, false),
                    ConfigError);
  }
}
