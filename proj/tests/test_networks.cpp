#include "doctest.h"
#include "oracles.hpp"
#include "streakfix/checkpoint.hpp"
#include "streakfix/losses.hpp"
#include "streakfix/networks.hpp"
#include "streakfix/training.hpp"

using namespace streakfix;

namespace {


template <typename Scalar>
void zero_params(Network<Scalar>& net) {
  net.visit([](const std::string&, nn::Parameter<Scalar>& p) { p.value.setZero(); });
}

template <typename Scalar>
std::vector<double> flat_values(Network<Scalar>& net) {
  std::vector<double> out;
  net.visit([&](const std::string&, nn::Parameter<Scalar>& p) {
    for (Index i = 0; i < p.size(); ++i) out.push_back(double(p.value[i]));
  });
  return out;
}

// Parameter counts written out from the layer shapes.
Index conv_params(Index in, Index out, Index k, bool bias) { return in * out * k * k + (bias ? out : 0); }
Index bn_params(Index c) { return 2 * c; }

}  // namespace

TEST_SUITE("networks") {
  TEST_CASE("conv2d matches the direct convolution") {
    std::mt19937_64 rng(1);
    const auto x = oracle::random_tensor<double>(rng, 2, 3, 9, 7, -1, 1);
    for (auto [k, s, p] : {std::tuple{3, 1, 1}, std::tuple{4, 2, 1}, std::tuple{1, 1, 0}}) {
      nn::Conv2d<double> conv(3, 5, k, s, p, true);
      conv.weight.value = Vector<double>::Random(conv.weight.size());
      conv.bias.value = Vector<double>::Random(5);
      std::vector<double> w(conv.weight.value.data(), conv.weight.value.data() + conv.weight.size());
      auto expected = oracle::conv2d(x, w, 5, k, s, p);
      for (Index n = 0; n < 2; ++n)
        for (Index o = 0; o < 5; ++o) expected.plane(n, o).array() += conv.bias.value[o];
      const auto y = conv.forward(x);
      REQUIRE(y.shape() == expected.shape());
      CHECK((y.values() - expected.values()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("transposed conv matches the scatter definition") {
    std::mt19937_64 rng(2);
    const auto x = oracle::random_tensor<double>(rng, 2, 3, 4, 5, -1, 1);
    nn::ConvTranspose2d<double> deconv(3, 2, 4, 2, 1);
    deconv.weight.value = Vector<double>::Random(deconv.weight.size());
    std::vector<double> w(deconv.weight.value.data(), deconv.weight.value.data() + deconv.weight.size());
    const auto expected = oracle::conv_transpose2d(x, w, 2, 4, 2, 1);
    const auto y = deconv.forward(x);
    REQUIRE(y.shape() == Shape4{2, 2, 8, 10});
    CHECK((y.values() - expected.values()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("layer backward passes are adjoint to the forward maps") {
    std::mt19937_64 rng(3);
    SUBCASE("conv2d input gradient") {
      nn::Conv2d<double> conv(2, 3, 4, 2, 1, false);
      conv.weight.value = Vector<double>::Random(conv.weight.size());
      const auto x = oracle::random_tensor<double>(rng, 1, 2, 8, 8, -1, 1);
      const auto y = conv.forward(x);
      const auto g = oracle::random_tensor<double>(rng, 1, 3, y.h(), y.w(), -1, 1);
      const auto gx = conv.backward(g);
      CHECK(y.values().dot(g.values()) == doctest::Approx(x.values().dot(gx.values())).epsilon(1e-12));
    }
    SUBCASE("upsample") {
      const auto x = oracle::random_tensor<double>(rng, 1, 2, 3, 4, -1, 1);
      const auto y = nn::upsample_nearest2x(x);
      const auto g = oracle::random_tensor<double>(rng, 1, 2, 6, 8, -1, 1);
      CHECK(y.values().dot(g.values()) ==
            doctest::Approx(x.values().dot(nn::upsample_nearest2x_grad(g).values())).epsilon(1e-12));
    }
  }

  TEST_CASE("generator preserves shape and outputs lie in (0,1)") {
    Generator<float> g({8, 8, 8, 8});
    g.initialize(1);
    std::mt19937_64 rng(4);
    for (auto [h, w] : {std::pair{16, 16}, std::pair{32, 48}, std::pair{64, 64}}) {
      const auto x = oracle::random_tensor<float>(rng, 2, 1, h, w);
      const auto y = g.forward(x, true);
      CHECK(y.shape() == x.shape());
      CHECK(y.values().minCoeff() > 0.0f);
      CHECK(y.values().maxCoeff() < 1.0f);
    }
  }

  TEST_CASE("generator 256 in, 256 out") {
    Generator<float> g({4, 4, 4, 4});
    g.initialize(2);
    const auto y = g.forward(Tensor<float>::constant({1, 1, 256, 256}, 0.4f), false);
    CHECK(y.shape() == Shape4{1, 1, 256, 256});
  }

  TEST_CASE("generator rejects sizes not divisible by 16") {
    Generator<float> g({4, 4, 4, 4});
    CHECK_THROWS_AS(g.forward(Tensor<float>(1, 1, 24, 32), false), InputError);
  }

  TEST_CASE("all-zero generator outputs 0.5") {
    for (bool skip : {true, false}) {
      Generator<double> g({4, 4, 4, 4}, skip);
      zero_params(g);
      std::mt19937_64 rng(5);
      const auto y = g.forward(oracle::random_tensor<double>(rng, 2, 1, 32, 32), true);
      CHECK(y.values().minCoeff() == 0.5);
      CHECK(y.values().maxCoeff() == 0.5);
    }
  }

  TEST_CASE("fresh generator with input skip is close to the identity") {
    Generator<float> g;
    g.initialize(3);
    std::mt19937_64 rng(6);
    const auto x = oracle::random_tensor<float>(rng, 2, 1, 32, 32, 0.05, 0.95);
    const auto y = g.forward(x, true);
    CHECK((y.values() - x.values()).cwiseAbs().maxCoeff() < 0.01f);
  }

  TEST_CASE("initialization") {
    SUBCASE("same seed, same parameters; different seed differs") {
      Generator<float> a, b, c;
      a.initialize(9);
      b.initialize(9);
      c.initialize(10);
      CHECK(flat_values(a) == flat_values(b));
      CHECK(flat_values(a) != flat_values(c));
    }
    SUBCASE("fixed seed and input give identical outputs") {
      Generator<float> a({8, 8, 8, 8}), b({8, 8, 8, 8});
      a.initialize(4);
      b.initialize(4);
      const auto x = Tensor<float>::constant({1, 1, 32, 32}, 0.3f);
      CHECK(a.forward(x, false).values() == b.forward(x, false).values());
    }
    SUBCASE("conv weights have std 0.02, batch-norm scale 1 and shift 0") {
      Generator<float> g;
      g.initialize(11);
      int large = 0;
      g.visit([&](const std::string& name, nn::Parameter<float>& p) {
        if (name.ends_with(".bn.weight")) {
          CHECK(p.value.minCoeff() == 1.0f);
          CHECK(p.value.maxCoeff() == 1.0f);
        } else if (name.ends_with(".bn.bias")) {
          CHECK(p.value.cwiseAbs().maxCoeff() == 0.0f);
        } else if (name.ends_with(".weight") && p.size() >= 10000) {
          const double mean = p.value.cast<double>().mean();
          const double sd = std::sqrt((p.value.cast<double>().array() - mean).square().mean());
          CHECK(sd >= 0.015);
          CHECK(sd <= 0.025);
          ++large;
        }
      });
      CHECK(large == 7);
    }
  }

  TEST_CASE("parameter counts") {
    const Index g_expected = conv_params(1, 64, 4, false) + bn_params(64) +
                             conv_params(64, 128, 4, false) + bn_params(128) +
                             conv_params(128, 256, 4, false) + bn_params(256) +
                             conv_params(256, 512, 4, false) + bn_params(512) +
                             conv_params(512, 256, 4, false) + bn_params(256) +
                             conv_params(512, 128, 4, false) + bn_params(128) +
                             conv_params(256, 64, 4, false) + bn_params(64) +
                             conv_params(128, 64, 4, false) + bn_params(64) +
                             conv_params(65, 1, 3, true);
    Generator<float> g;
    CHECK(g.widths() == std::vector<Index>{64, 128, 256, 512});
    CHECK(g.parameter_count() == g_expected);
    Generator<float> plain({64, 128, 256, 512}, false);
    CHECK(plain.parameter_count() == g_expected - 9);

    const Index encoder = conv_params(1, 64, 4, false) + bn_params(64) +
                          conv_params(64, 128, 4, false) + bn_params(128) +
                          conv_params(128, 256, 4, false) + bn_params(256);
    auto classifier = [](Index c) { return conv_params(c, c, 3, false) + bn_params(c) + conv_params(c, 1, 1, true); };
    DiscriminatorA<float> da;
    CHECK(da.parameter_count() == encoder + classifier(256));
    DiscriminatorB<float> db;
    CHECK(db.parameter_count() == encoder + conv_params(128, 128, 1, true) + conv_params(256, 128, 1, true) +
                                      conv_params(128, 128, 3, true) + 2 * classifier(128));
  }

  TEST_CASE("discriminator A") {
    DiscriminatorA<float> d;
    d.initialize(1);
    std::mt19937_64 rng(7);
    const auto x = oracle::random_tensor<float>(rng, 2, 1, 64, 64);
    const auto s = d.forward(x, true);
    REQUIRE(s.size() == 1);
    CHECK(s[0].stride == 8);
    CHECK(s[0].scores.shape() == Shape4{2, 1, 8, 8});
    CHECK_THROWS_AS(d.forward(Tensor<float>(1, 1, 60, 64), true), InputError);

    SUBCASE("evaluation mode is per-sample") {
      const auto batch = d.forward(x, false)[0].scores;
      Tensor<float> first(1, 1, 64, 64);
      first.plane(0, 0) = x.plane(0, 0);
      const auto single = d.forward(first, false)[0].scores;
      CHECK((batch.plane(0, 0) - single.plane(0, 0)).cwiseAbs().maxCoeff() < 1e-5f);
    }
    SUBCASE("all-zero parameters give zero scores") {
      zero_params(d);
      CHECK(d.forward(x, true)[0].scores.values().cwiseAbs().maxCoeff() == 0.0f);
    }
  }

  TEST_CASE("discriminator B") {
    DiscriminatorB<float> d;
    d.initialize(2);
    std::mt19937_64 rng(8);
    SUBCASE("score map resolutions") {
      for (auto [h, w] : {std::pair{64, 64}, std::pair{256, 256}, std::pair{40, 24}}) {
        const auto s = d.forward(oracle::random_tensor<float>(rng, 1, 1, h, w), true);
        REQUIRE(s.size() == 2);
        CHECK(s[0].stride == 8);
        CHECK(s[1].stride == 4);
        CHECK(s[0].scores.shape() == Shape4{1, 1, h / 8, w / 8});
        CHECK(s[1].scores.shape() == Shape4{1, 1, h / 4, w / 4});
      }
      CHECK_THROWS_AS(d.forward(Tensor<float>(1, 1, 20, 24), true), InputError);
    }
    SUBCASE("D2 depends on the top-level lateral path") {
      const auto x = oracle::random_tensor<float>(rng, 2, 1, 32, 32);
      const auto before = d.forward(x, false);
      d.lateral_top().weight.value.setZero();
      d.lateral_top().bias.value.setZero();
      const auto after = d.forward(x, false);
      CHECK((before[1].scores.values() - after[1].scores.values()).cwiseAbs().maxCoeff() > 1e-6f);
    }
    SUBCASE("all-zero parameters give zero score maps") {
      zero_params(d);
      const auto s = d.forward(oracle::random_tensor<float>(rng, 1, 1, 32, 32), true);
      CHECK(s[0].scores.values().cwiseAbs().maxCoeff() == 0.0f);
      CHECK(s[1].scores.values().cwiseAbs().maxCoeff() == 0.0f);
    }
  }

  TEST_CASE("every generator parameter receives a gradient") {
    Generator<double> g({4, 6, 8, 10});
    DiscriminatorA<double> d({4, 4, 4});
    g.initialize(5);
    d.initialize(6);
    std::mt19937_64 rng(9);
    const auto x = oracle::random_tensor<double>(rng, 2, 1, 32, 32, 0.05, 0.95);
    const auto dense = oracle::random_tensor<double>(rng, 2, 1, 32, 32);
    const StubExtractor<double> stub;
    const auto fake = g.forward(x, true);
    const auto fake_pass = stub.forward(fake, {TapName::kI}, true);
    const auto dense_pass = stub.forward(dense, {TapName::kI}, false);
    std::vector<FocusMap<double>> lambdas{FocusMap<double>::ones({2, 1, 4, 4}, 8)};
    auto terms = generator_terms<double>(d, &stub, fake, dense, &fake_pass, &dense_pass, lambdas,
                                         LossWeights{}, Regularizer::kPerceptual, true);
    g.zero_grad();
    g.backward(terms.grad_fake);
    g.visit([](const std::string& name, nn::Parameter<double>& p) {
      INFO(name);
      CHECK(p.grad.cwiseAbs().maxCoeff() > 0.0);
    });
  }

  TEST_CASE("generator input and parameter gradients with unequal widths") {
    Generator<double> g({2, 3, 4, 5});
    g.initialize(12);
    std::mt19937_64 rng(10);
    auto x = oracle::random_tensor<double>(rng, 2, 1, 16, 16, 0.1, 0.9);
    const auto probe = oracle::random_tensor<double>(rng, 2, 1, 16, 16, -1, 1);
    auto loss = [&]() { return g.forward(x, true).values().dot(probe.values()); };
    loss();
    g.zero_grad();
    const auto gx = g.backward(probe);
    std::vector<std::pair<nn::Parameter<double>*, Index>> picks;
    g.visit([&](const std::string&, nn::Parameter<double>& p) { picks.emplace_back(&p, p.size() / 2); });
    for (auto [p, i] : picks) {
      const double analytic = p->grad[i], saved = p->value[i];
      p->value[i] = saved + 1e-6;
      const double up = loss();
      p->value[i] = saved - 1e-6;
      const double down = loss();
      p->value[i] = saved;
      const double fd = (up - down) / 2e-6;
      CHECK(std::abs(analytic - fd) <= 1e-8 + 1e-5 * std::abs(fd));
    }
    for (Index i : {Index(3), Index(100), Index(300)}) {
      const double saved = x.values()[i];
      x.values()[i] = saved + 1e-6;
      const double up = loss();
      x.values()[i] = saved - 1e-6;
      const double down = loss();
      x.values()[i] = saved;
      const double fd = (up - down) / 2e-6;
      CHECK(std::abs(gx.values()[i] - fd) <= 1e-8 + 1e-5 * std::abs(fd));
    }
  }

  TEST_CASE("checkpoint round trip restores outputs") {
    Generator<float> a({4, 8, 8, 8});
    a.initialize(13);
    const auto x = Tensor<float>::constant({1, 1, 32, 32}, 0.6f);
    a.forward(x, true);  // move the running statistics off their defaults
    const std::string bytes = encode_checkpoint(snapshot(a, 13, 2));
    const Checkpoint ck = decode_checkpoint(bytes);
    CHECK(ck.arch == "generator");
    CHECK(ck.epoch == 2);
    auto b = generator_from_checkpoint(ck);
    CHECK(a.forward(x, false).values() == b->forward(x, false).values());
    DiscriminatorA<float> d;
    CHECK_THROWS_AS(restore(d, ck), ConfigError);
  }
}
