#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streakfix/image.hpp"
#include "streakfix/tomo.hpp"

namespace streakfix {

/// Gaussian-window SSIM parameters (dynamic range L = 1).
struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

/// Mean SSIM over all fully-contained (valid-mode) windows.
double ssim(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b,
            const SsimOptions& opts = {});
/// 10·log10(L²/MSE); +infinity when the images are identical.
double psnr(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b, double range = 1.0);
double rmse(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b);
double mse(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b);

/// Normalized 1D Gaussian taps used by `ssim`.
Eigen::VectorXd gaussian_window(int size, double sigma);

struct MetricsRow {
  std::string model;
  double ssim = 0;
  double psnr = 0;
  double rmse = 0;
  bool present = true;
};

/// Mean per-slice metrics of every model against `dense`. Rows are sorted by
/// SSIM descending; models listed in `absent` follow as rows with present=false.
std::vector<MetricsRow> evaluate_outputs(const std::vector<Image>& dense,
                                         const std::map<std::string, std::vector<Image>>& outputs,
                                         const std::vector<std::string>& absent = {});

struct RoiEntry {
  std::string model;
  double mean = 0;
  double stddev = 0;
  Image difference;  // dense ROI − model ROI
};

struct RoiReport {
  Window window;
  std::vector<RoiEntry> entries;  // "x_d", "x_s", then models in map order
};

RoiReport roi_report(const Image& dense, const Image& sparse,
                     const std::map<std::string, Image>& model_outputs, const Window& window);

}  // namespace streakfix
