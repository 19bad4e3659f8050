#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "streakfix/report.hpp"

using namespace streakfix;
namespace fs = std::filesystem;

TEST_SUITE("evaluation") {
  TEST_CASE("ssim") {
    std::mt19937_64 rng(1);
    const Image x = oracle::random_image(rng, 24, 20);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    const Image a = Image::Constant(16, 16, 0.2f), b = Image::Constant(16, 16, 0.4f);
    const double ma = double(0.2f), mb = double(0.4f), c1 = 1e-4;
    CHECK(ssim(a, b) == doctest::Approx((2 * ma * mb + c1) / (ma * ma + mb * mb + c1)).epsilon(1e-9));

    for (int trial = 0; trial < 20; ++trial) {
      const Image p = oracle::random_image(rng, 16, 16), q = oracle::random_image(rng, 16, 16);
      CHECK(std::abs(ssim(p, q) - oracle::ssim(p, q)) < 1e-8);
    }
    CHECK_THROWS_AS(ssim(x, Image::Zero(24, 21)), InputError);
    CHECK_THROWS_AS(ssim(Image::Zero(8, 8), Image::Zero(8, 8)), InputError);
  }

  TEST_CASE("noise lowers ssim") {
    std::mt19937_64 rng(2);
    const Image x = oracle::random_image(rng, 32, 32);
    std::normal_distribution<float> n(0.0f, 0.05f);
    Image noisy = x;
    for (Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += n(rng);
    Image noisier = noisy;
    for (Index i = 0; i < noisier.size(); ++i) noisier.data()[i] += n(rng);
    CHECK(ssim(noisy, x) < 1.0);
    CHECK(ssim(noisier, x) < ssim(noisy, x));
  }

  TEST_CASE("psnr and rmse") {
    const Image zero = Image::Zero(8, 8), half = Image::Constant(8, 8, 0.5f);
    CHECK(psnr(zero, half) == doctest::Approx(6.0206).epsilon(1e-4));
    CHECK(std::isinf(psnr(half, half)));
    CHECK(psnr(half, half) > 0);
    CHECK(rmse(zero, half) == doctest::Approx(0.5));
    CHECK(rmse(half, half) == 0.0);
    std::mt19937_64 rng(3);
    const Image a = oracle::random_image(rng, 16, 16);
    const Image d = oracle::random_image(rng, 16, 16) * 0.01f;
    const Image b1 = a + d, b10 = a + Image(d * 10.0f);
    CHECK(psnr(a, b10) == doctest::Approx(psnr(a, b1) - 20.0).epsilon(1e-5));
    for (int trial = 0; trial < 20; ++trial) {
      const Image p = oracle::random_image(rng, 16, 16), q = oracle::random_image(rng, 16, 16);
      CHECK(std::abs(rmse(p, q) - oracle::rmse(p, q)) < 1e-8);
      CHECK(std::abs(psnr(p, q) - oracle::psnr(p, q)) < 1e-8);
    }
    CHECK_THROWS_AS(rmse(zero, Image::Zero(8, 9)), InputError);
  }

  TEST_CASE("roi report") {
    Image dense(6, 6), sparse(6, 6);
    for (Index i = 0; i < 36; ++i) {
      dense.data()[i] = float(i) / 36.0f;
      sparse.data()[i] = float(i % 5) / 10.0f;
    }
    const Window w{1, 2, 4, 4};
    const auto r = roi_report(dense, sparse, {{"model", dense}}, w);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].model == "x_d");
    CHECK(r.entries[1].model == "x_s");
    // dense ROI values (6r + c)/36 for r in 1..4, c in 2..5: mean (6·2.5 + 3.5)/36
    CHECK(r.entries[0].mean == doctest::Approx(18.5 / 36.0).epsilon(1e-6));
    // population std: sqrt(var of 6r + var of c) / 36 with var(r) = var(c) = 1.25
    CHECK(r.entries[0].stddev == doctest::Approx(std::sqrt(36 * 1.25 + 1.25) / 36.0).epsilon(1e-6));
    CHECK(r.entries[0].difference.cwiseAbs().maxCoeff() == 0.0f);
    CHECK(r.entries[2].difference.cwiseAbs().maxCoeff() == 0.0f);
    CHECK(r.entries[2].mean == r.entries[0].mean);
    CHECK(r.entries[2].stddev == r.entries[0].stddev);
    double manual = 0;
    for (int y = 1; y < 5; ++y)
      for (int x = 2; x < 6; ++x) manual += sparse(y, x);
    CHECK(r.entries[1].mean == doctest::Approx(manual / 16.0).epsilon(1e-6));
    CHECK(r.entries[1].difference(0, 0) == dense(1, 2) - sparse(1, 2));
    CHECK_THROWS_AS(roi_report(dense, sparse, {}, Window{3, 3, 4, 2}), InputError);
    CHECK_THROWS_AS(roi_report(dense, sparse, {}, Window{-1, 0, 2, 2}), InputError);
  }

  TEST_CASE("evaluate_outputs") {
    std::mt19937_64 rng(4);
    std::vector<Image> dense, good, bad;
    for (int i = 0; i < 3; ++i) {
      dense.push_back(oracle::random_image(rng, 16, 16));
      good.push_back(dense.back() * 0.98f);
      bad.push_back(oracle::random_image(rng, 16, 16));
    }
    const auto rows = evaluate_outputs(dense, {{"bad", bad}, {"good", good}, {"x_d", dense}}, {"missing"});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].model == "x_d");
    CHECK(rows[1].model == "good");
    CHECK(rows[2].model == "bad");
    CHECK(rows[3].model == "missing");
    CHECK_FALSE(rows[3].present);
    CHECK(std::isinf(rows[0].psnr));
    CHECK(rows[0].rmse == 0.0);
    double mean_ssim = 0, mean_rmse = 0;
    for (int i = 0; i < 3; ++i) {
      mean_ssim += ssim(good[i], dense[i]) / 3;
      mean_rmse += rmse(good[i], dense[i]) / 3;
    }
    CHECK(rows[1].ssim == doctest::Approx(mean_ssim).epsilon(1e-12));
    CHECK(rows[1].rmse == doctest::Approx(mean_rmse).epsilon(1e-12));
  }

  TEST_CASE("table and CSV agree") {
    const std::vector<MetricsRow> rows{{"ours", 0.91234567, 35.5, 0.0123, true},
                                       {"x_s", 0.8, 30.25, 0.0301, true},
                                       {"x_d", 1.0, std::numeric_limits<double>::infinity(), 0.0, true},
                                       {"gone", 0, 0, 0, false}};
    const auto parsed = parse_metrics_csv(metrics_csv(rows));
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(parsed[i].model == rows[i].model);
      CHECK(parsed[i].present == rows[i].present);
      if (!rows[i].present) continue;
      CHECK(parsed[i].ssim == doctest::Approx(rows[i].ssim).epsilon(1e-9));
      if (std::isinf(rows[i].psnr))
        CHECK(parsed[i].psnr == rows[i].psnr);
      else
        CHECK(parsed[i].psnr == doctest::Approx(rows[i].psnr).epsilon(1e-9));
      CHECK(parsed[i].rmse == doctest::Approx(rows[i].rmse).epsilon(1e-9));
    }
    CHECK(metrics_csv(rows).starts_with("model,ssim,psnr_db,rmse\n"));
    const std::string table = metrics_table(rows);
    CHECK(table.find("0.9123") != std::string::npos);
    CHECK(table.find("1.2300") != std::string::npos);  // RMSE in units of 1e-2
    CHECK(table.find("inf") != std::string::npos);
    CHECK(table.find("(absent)") != std::string::npos);
  }

  TEST_CASE("report files") {
    std::mt19937_64 rng(5);
    const Image d = oracle::random_image(rng, 16, 16), s = oracle::random_image(rng, 16, 16);
    const auto roi = roi_report(d, s, {{"ours", d}}, Window{2, 2, 8, 8});
    const std::string dir = oracle::temp_dir("report");
    write_report(dir, evaluate_outputs({d}, {{"x_s", {s}}}), &roi);
    for (const char* f : {"metrics.txt", "metrics.csv", "roi.csv", "roi_bars.png", "difference_x_d.png",
                          "difference_x_s.png", "difference_ours.png"})
      CHECK(fs::exists(fs::path(dir) / f));
    const std::string csv = read_file((fs::path(dir) / "roi.csv").string());
    CHECK(csv.find("model,mean,stddev") != std::string::npos);
  }
}
