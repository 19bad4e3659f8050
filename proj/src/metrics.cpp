#include "streakfix/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "streakfix/errors.hpp"

namespace streakfix {

namespace {

void require_same_shape(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b,
                        const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InputError(std::string(who) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

/// Valid-mode separable correlation with a symmetric kernel.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& k) {
  const Eigen::Index n = k.size();
  const Eigen::Index rows = img.rows() - n + 1, cols = img.cols() - n + 1;
  Eigen::MatrixXd horizontal(img.rows(), cols);
  for (Eigen::Index c = 0; c < cols; ++c) horizontal.col(c) = img.middleCols(c, n) * k;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    out.row(r) = k.transpose() * horizontal.middleRows(r, n);
  return out;
}

}  // namespace

Eigen::VectorXd gaussian_window(int size, double sigma) {
  Eigen::VectorXd w(size);
  const double centre = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) w[i] = std::exp(-(i - centre) * (i - centre) / (2 * sigma * sigma));
  return w / w.sum();
}

double ssim(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b,
            const SsimOptions& opts) {
  require_same_shape(a, b, "ssim");
  if (a.rows() < opts.window || a.cols() < opts.window) {
    throw InputError("ssim: images must be at least " + std::to_string(opts.window) + " pixels per side");
  }
  const Eigen::VectorXd k = gaussian_window(opts.window, opts.sigma);
  const Eigen::MatrixXd x = a.cast<double>(), y = b.cast<double>();
  const Eigen::MatrixXd mx = filter_valid(x, k), my = filter_valid(y, k);
  const Eigen::ArrayXXd vx = filter_valid(x.cwiseProduct(x), k).array() - mx.array().square();
  const Eigen::ArrayXXd vy = filter_valid(y.cwiseProduct(y), k).array() - my.array().square();
  const Eigen::ArrayXXd cxy = filter_valid(x.cwiseProduct(y), k).array() - (mx.array() * my.array());
  const double c1 = std::pow(opts.k1 * opts.range, 2), c2 = std::pow(opts.k2 * opts.range, 2);
  const Eigen::ArrayXXd num = (2 * mx.array() * my.array() + c1) * (2 * cxy + c2);
  const Eigen::ArrayXXd den = (mx.array().square() + my.array().square() + c1) * (vx + vy + c2);
  return (num / den).mean();
}

double mse(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw InputError("mse: empty images");
  return (a.cast<double>() - b.cast<double>()).squaredNorm() / static_cast<double>(a.size());
}

double rmse(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b) {
  return std::sqrt(mse(a, b));
}

double psnr(const Eigen::Ref<const Image>& a, const Eigen::Ref<const Image>& b, double range) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / m);
}

std::vector<MetricsRow> evaluate_outputs(const std::vector<Image>& dense,
                                         const std::map<std::string, std::vector<Image>>& outputs,
                                         const std::vector<std::string>& absent) {
  std::vector<MetricsRow> rows;
  for (const auto& [name, images] : outputs) {
    if (images.size() != dense.size()) {
      throw InputError("evaluate: model '" + name + "' has " + std::to_string(images.size()) +
                       " outputs for " + std::to_string(dense.size()) + " references");
    }
    if (dense.empty()) continue;
    MetricsRow row{name};
    for (std::size_t i = 0; i < dense.size(); ++i) {
      row.ssim += ssim(images[i], dense[i]);
      row.psnr += psnr(images[i], dense[i]);
      row.rmse += rmse(images[i], dense[i]);
    }
    const double n = static_cast<double>(dense.size());
    row.ssim /= n;
    row.psnr /= n;
    row.rmse /= n;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MetricsRow& l, const MetricsRow& r) { return l.ssim > r.ssim; });
  for (const auto& name : absent) rows.push_back({name, 0, 0, 0, false});
  return rows;
}

RoiReport roi_report(const Image& dense, const Image& sparse,
                     const std::map<std::string, Image>& model_outputs, const Window& window) {
  require_same_shape(dense, sparse, "roi_report");
  if (window.row < 0 || window.col < 0 || window.height <= 0 || window.width <= 0 ||
      window.row + window.height > dense.rows() || window.col + window.width > dense.cols()) {
    throw InputError("roi_report: window (" + std::to_string(window.row) + "," +
                     std::to_string(window.col) + "," + std::to_string(window.height) + "," +
                     std::to_string(window.width) + ") must lie inside the " + std::to_string(dense.rows()) + "x" +
                     std::to_string(dense.cols()) + " image (row+height <= " +
                     std::to_string(dense.rows()) + ", col+width <= " +
                     std::to_string(dense.cols()) + ")");
  }
  RoiReport report{window, {}};
  const Image reference = dense.block(window.row, window.col, window.height, window.width);
  auto add = [&](const std::string& name, const Image& img) {
    require_same_shape(dense, img, "roi_report");
    const Image roi = img.block(window.row, window.col, window.height, window.width);
    const Eigen::ArrayXXd v = roi.cast<double>().array();
    const double mean = v.mean();
    const double stddev = std::sqrt((v - mean).square().mean());
    report.entries.push_back({name, mean, stddev, reference - roi});
  };
  add("x_d", dense);
  add("x_s", sparse);
  for (const auto& [name, img] : model_outputs) add(name, img);
  return report;
}

}  // namespace streakfix
