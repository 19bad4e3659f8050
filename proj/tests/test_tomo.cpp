#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "streakfix/dataset.hpp"
#include "streakfix/metrics.hpp"
#include "streakfix/tomo.hpp"

using namespace streakfix;

namespace {

// Observed 360-view round-trip RMSE of the seed-7 128² phantom was 0.010869.
constexpr double kRoundTripRmse360 = 0.0115;

PhantomSpec spec_with_seed(std::uint64_t seed, int size = 128) {
  PhantomSpec s;
  s.seed = seed;
  s.size = size;
  return s;
}

Image centered_disk(int n, double r) {
  Image img(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double y = i - (n - 1) / 2.0, x = j - (n - 1) / 2.0;
      img(i, j) = (x * x + y * y <= r * r) ? 1.0f : 0.0f;
    }
  return img;
}

}  // namespace

TEST_SUITE("tomo_sim") {
  TEST_CASE("phantom with no ellipses is all zero") {
    PhantomSpec s = spec_with_seed(3);
    s.num_ellipses = 0;
    CHECK(make_phantom(s).cwiseAbs().maxCoeff() == 0.0f);
  }

  TEST_CASE("phantom is deterministic in seed and differs across seeds") {
    const Image a = make_phantom(spec_with_seed(7));
    const Image b = make_phantom(spec_with_seed(7));
    const Image c = make_phantom(spec_with_seed(8));
    CHECK(a == b);
    CHECK((a.array() != c.array()).count() >= 1);
  }

  TEST_CASE("phantom values lie in [0,1]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      PhantomSpec s = spec_with_seed(seed, 64);
      s.num_ellipses = 12;
      for (double z : {-0.6, 0.0, 0.4}) {
        const Image p = make_phantom_slice(s, z).image;
        CHECK(p.minCoeff() >= 0.0f);
        CHECK(p.maxCoeff() <= 1.0f);
      }
    }
  }

  TEST_CASE("invalid phantom spec is a configuration error") {
    PhantomSpec s = spec_with_seed(1);
    s.size = 0;
    CHECK_THROWS_AS(make_phantom(s), ConfigError);
    s = spec_with_seed(1);
    s.intensity_lo = 0.8;
    s.intensity_hi = 0.2;
    CHECK_THROWS_AS(make_phantom(s), ConfigError);
  }

  TEST_CASE("bone window lies inside the image and covers bright pixels") {
    const Phantom p = make_phantom_slice(spec_with_seed(5), 0.0);
    const Window& w = p.bone;
    REQUIRE(w.height > 0);
    CHECK(w.row >= 0);
    CHECK(w.col >= 0);
    CHECK(w.row + w.height <= 128);
    CHECK(w.col + w.width <= 128);
    const float roi_mean = p.image.block(w.row, w.col, w.height, w.width).mean();
    CHECK(roi_mean > p.image.mean());
  }

  TEST_CASE("zero image projects to the zero sinogram") {
    const Sinogram s = forward_project(Image::Zero(32, 32), Geometry::for_image(32, 10));
    CHECK(s.data.rows() == 10);
    CHECK(s.data.cols() == 32);
    CHECK(s.data.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("projection rejects non-square and non-finite images") {
    CHECK_THROWS_AS(forward_project(Image::Zero(32, 16), Geometry::for_image(32, 4)), InputError);
    Image bad = Image::Zero(16, 16);
    bad(3, 3) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(forward_project(bad, Geometry::for_image(16, 4)), InputError);
  }

  TEST_CASE("centered disk projections match the chord length") {
    const int n = 128;
    const double r = 40;
    const Geometry g = Geometry::for_image(n, 16);
    const Sinogram s = forward_project(centered_disk(n, r), g);
    double worst = 0;
    for (int v = 0; v < g.num_views; ++v)
      for (int b = 0; b < n; ++b) {
        const double off = g.bin_offset(b);
        if (std::abs(off) < r - 2) {
          worst = std::max(worst, std::abs(s.data(v, b) - 2 * std::sqrt(r * r - off * off)));
        }
      }
    // pixelated disk edge: at most ~one pixel of chord length
    CHECK(worst < 1.25);
  }

  TEST_CASE("centered disk views agree") {
    const int n = 128;
    const Image disk = centered_disk(n, 40);
    // The pixel grid is symmetric under quarter turns and diagonal reflection,
    // so these view pairs must agree to rounding.
    const Sinogram s4 = forward_project(disk, Geometry::for_image(n, 4));
    const double scale = s4.data.cwiseAbs().maxCoeff();
    CHECK((s4.data.row(0) - s4.data.row(2)).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    CHECK((s4.data.row(1) - s4.data.row(3)).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    // Between arbitrary angles the rasterized edge limits agreement.
    const Sinogram s = forward_project(disk, Geometry::for_image(n, 16));
    double spread = 0;
    for (int v = 1; v < 16; ++v)
      spread = std::max(spread, (s.data.row(v) - s.data.row(0)).cwiseAbs().maxCoeff());
    CHECK(spread <= 0.025 * scale);
  }

  TEST_CASE("projection is linear") {
    std::mt19937_64 rng(11);
    const Image a = oracle::random_image(rng, 48, 48), b = oracle::random_image(rng, 48, 48);
    const Geometry g = Geometry::for_image(48, 30);
    const double alpha = 0.7, beta = -1.3;
    const Image combo = (alpha * a.cast<double>() + beta * b.cast<double>()).cast<float>();
    const Eigen::MatrixXd lhs = forward_project(combo, g).data;
    const Eigen::MatrixXd rhs = alpha * forward_project(a, g).data + beta * forward_project(b, g).data;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-6 * rhs.cwiseAbs().maxCoeff());
  }

  TEST_CASE("zero sinogram reconstructs to zero; one bin is rejected") {
    Sinogram s{Eigen::MatrixXd::Zero(20, 32), Geometry::for_image(32, 20)};
    CHECK(filtered_backprojection(s).cwiseAbs().maxCoeff() == 0.0f);
    Sinogram tiny{Eigen::MatrixXd::Zero(4, 1), Geometry{4, 1, std::numbers::pi, 1.0}};
    CHECK_THROWS_AS(filtered_backprojection(tiny), ConfigError);
  }

  TEST_CASE("360-view round trip stays within the frozen bound") {
    const Image phantom = make_phantom(spec_with_seed(7));
    const Image rec = filtered_backprojection(forward_project(phantom, Geometry::for_image(128, 360)));
    const double err = rmse(rec, phantom);
    MESSAGE("360-view RMSE " << err);
    CHECK(err < 0.05);
    CHECK(err < kRoundTripRmse360);
  }

  TEST_CASE("sparse views reconstruct worse than dense views") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      const Image phantom = make_phantom(spec_with_seed(seed));
      const PairedSample p = make_pair(phantom);
      CHECK(rmse(p.sparse, phantom) > rmse(p.dense, phantom));
    }
  }

  TEST_CASE("mean reconstruction error decreases with view count") {
    const int views[] = {25, 67, 200, 360};
    double mean[4] = {0, 0, 0, 0};
    for (std::uint64_t seed = 200; seed < 220; ++seed) {
      const Image phantom = make_phantom(spec_with_seed(seed));
      for (int k = 0; k < 4; ++k) {
        const Image rec =
            filtered_backprojection(forward_project(phantom, Geometry::for_image(128, views[k])));
        mean[k] += rmse(rec, phantom) / 20.0;
      }
    }
    MESSAGE("mean RMSE by views: " << mean[0] << " " << mean[1] << " " << mean[2] << " " << mean[3]);
    CHECK(mean[0] > mean[1]);
    CHECK(mean[1] > mean[2]);
    CHECK(mean[2] > mean[3]);
  }

  TEST_CASE("make_pair uses 67/200 views by default and rejects equal view counts") {
    const Image phantom = make_phantom(spec_with_seed(9, 64));
    const PairedSample p = make_pair(phantom);
    const PairedSample q = make_pair(phantom, 67, 200);
    CHECK(p.sparse == q.sparse);
    CHECK(p.dense == q.dense);
    const Image s67 = filtered_backprojection(forward_project(phantom, Geometry::for_image(64, 67)));
    CHECK(p.sparse == s67);
    CHECK(p.sparse.rows() == p.dense.rows());
    CHECK_THROWS_AS(make_pair(phantom, 100, 100), ConfigError);
    CHECK_THROWS_AS(make_pair(phantom, 200, 67), ConfigError);
  }

  TEST_CASE("crop_patches") {
    const PairedSample pair = make_pair(make_phantom(spec_with_seed(4, 64)), 20, 40);
    SUBCASE("full-size crop returns the pair itself") {
      const auto crops = crop_patches(pair, 64, 1, 3);
      REQUIRE(crops.size() == 1);
      CHECK(crops[0].pair.sparse == pair.sparse);
      CHECK(crops[0].pair.dense == pair.dense);
      CHECK(crops[0].window == Window{0, 0, 64, 64});
    }
    SUBCASE("crops are aligned with their windows") {
      for (const auto& c : crop_patches(pair, 24, 30, 5)) {
        const Window& w = c.window;
        CHECK(c.pair.dense == pair.dense.block(w.row, w.col, w.height, w.width));
        CHECK(c.pair.sparse == pair.sparse.block(w.row, w.col, w.height, w.width));
      }
    }
    SUBCASE("same seed gives the same windows") {
      const auto a = crop_patches(pair, 16, 10, 77), b = crop_patches(pair, 16, 10, 77);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].window == b[i].window);
    }
    SUBCASE("patch size must be a multiple of 8 and fit") {
      CHECK_THROWS_AS(crop_patches(pair, 20, 1, 0), ConfigError);
      CHECK_THROWS_AS(crop_patches(pair, 72, 1, 0), ConfigError);
    }
  }

  TEST_CASE("256 patches on a 384 slice stay in bounds") {
    PairedSample pair;
    pair.sparse = Image::Random(384, 384);
    pair.dense = Image::Random(384, 384);
    for (const auto& c : crop_patches(pair, 256, 20, 1)) {
      CHECK(c.pair.dense.rows() == 256);
      CHECK(c.pair.dense.cols() == 256);
      CHECK(c.window.row + 256 <= 384);
      CHECK(c.window.col + 256 <= 384);
    }
  }

  TEST_CASE("dataset container") {
    DataConfig cfg;
    cfg.size = 32;
    cfg.slices = 2;
    cfg.phantoms = 3;
    cfg.seed = 5;
    SUBCASE("round trip is bit-identical and pairs share their phantom") {
      const std::string dir = oracle::temp_dir("dataset_roundtrip");
      const Dataset written = build_dataset(cfg, dir);
      const Dataset loaded = load_dataset(dir);
      REQUIRE(loaded.samples.size() == 6);
      for (std::size_t i = 0; i < 6; ++i) {
        const auto& r = loaded.samples[i];
        CHECK(r.sparse_path.rfind(r.phantom_id + "_" + r.slice_id, 0) == 0);
        CHECK(r.dense_path.rfind(r.phantom_id + "_" + r.slice_id, 0) == 0);
        const PairedSample a = written.load(written.samples[i]);
        const PairedSample b = loaded.load(r);
        CHECK(a.sparse == b.sparse);
        CHECK(a.dense == b.dense);
        CHECK(b.phantom_id == r.phantom_id);
      }
      CHECK(loaded.phantom_ids() == std::vector<std::string>{"p000", "p001", "p002"});
    }
    SUBCASE("zero phantoms is a valid empty dataset") {
      cfg.phantoms = 0;
      const std::string dir = oracle::temp_dir("dataset_empty");
      build_dataset(cfg, dir);
      CHECK(load_dataset(dir).samples.empty());
    }
    SUBCASE("27 phantoms form 27 groups") {
      cfg.phantoms = 27;
      cfg.slices = 1;
      cfg.size = 16;
      const std::string dir = oracle::temp_dir("dataset_27");
      CHECK(build_dataset(cfg, dir).phantom_ids().size() == 27);
    }
    SUBCASE("same seed gives an identical manifest") {
      const std::string a = oracle::temp_dir("dataset_det_a"), b = oracle::temp_dir("dataset_det_b");
      build_dataset(cfg, a);
      build_dataset(cfg, b);
      CHECK(read_file(a + "/manifest.json") == read_file(b + "/manifest.json"));
      CHECK(read_file(a + "/p001_s01_sparse.svcb") == read_file(b + "/p001_s01_sparse.svcb"));
    }
    SUBCASE("invalid config writes nothing") {
      cfg.sparse_views = 300;
      const std::string dir = oracle::temp_dir("dataset_invalid") + "/out";
      CHECK_THROWS_AS(build_dataset(cfg, dir), ConfigError);
      CHECK_FALSE(std::filesystem::exists(dir));
    }
  }
}
