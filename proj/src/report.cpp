#include "streakfix/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace streakfix {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string psnr_text(double v, const char* f) { return std::isinf(v) ? "inf" : fmt(f, v); }

}  // namespace

std::string metrics_table(const std::vector<MetricsRow>& rows) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %8s  %10s  %12s\n", static_cast<int>(name_w), "model",
                "SSIM", "PSNR (dB)", "RMSE (1e-2)");
  os << line;
  for (const auto& r : rows) {
    if (!r.present) {
      std::snprintf(line, sizeof line, "%-*s  %8s  %10s  %12s  (absent)\n",
                    static_cast<int>(name_w), r.model.c_str(), "-", "-", "-");
    } else {
      std::snprintf(line, sizeof line, "%-*s  %8.4f  %10s  %12.4f\n", static_cast<int>(name_w),
                    r.model.c_str(), r.ssim, psnr_text(r.psnr, "%.3f").c_str(), r.rmse * 100.0);
    }
    os << line;
  }
  return os.str();
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "model,ssim,psnr_db,rmse\n";
  for (const auto& r : rows) {
    if (r.model.find_first_of(",\"\n") != std::string::npos) {
      throw InputError("model name '" + r.model + "' cannot be written to CSV");
    }
    os << r.model << ',';
    if (r.present) {
      os << fmt("%.10g", r.ssim) << ',' << psnr_text(r.psnr, "%.10g") << ','
         << fmt("%.10g", r.rmse);
    } else {
      os << ",,";
    }
    os << '\n';
  }
  return os.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "model,ssim,psnr_db,rmse") {
    throw InputError("metrics CSV: unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    while (f.size() < 4) f.emplace_back();
    if (f.size() != 4) throw InputError("metrics CSV: expected 4 fields in '" + line + "'");
    MetricsRow r;
    r.model = f[0];
    r.present = !f[1].empty();
    if (r.present) {
      r.ssim = std::stod(f[1]);
      r.psnr = f[2] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(f[2]);
      r.rmse = std::stod(f[3]);
    }
    rows.push_back(r);
  }
  return rows;
}

std::string roi_csv(const RoiReport& report) {
  std::ostringstream os;
  const auto& w = report.window;
  os << "# window row=" << w.row << " col=" << w.col << " height=" << w.height
     << " width=" << w.width << '\n';
  os << "model,mean,stddev\n";
  for (const auto& e : report.entries)
    os << e.model << ',' << fmt("%.10g", e.mean) << ',' << fmt("%.10g", e.stddev) << '\n';
  return os.str();
}

std::vector<std::string> write_difference_maps(const RoiReport& report, const std::string& dir) {
  double scale = 0;
  for (const auto& e : report.entries)
    if (e.difference.size() > 0) scale = std::max(scale, double(e.difference.cwiseAbs().maxCoeff()));
  if (scale == 0) scale = 1;
  const auto& w = report.window;
  const int side = std::max(1, std::min(w.height, w.width));
  const int up = std::max(1, (128 + side - 1) / side);
  std::vector<std::string> paths;
  for (const auto& e : report.entries) {
    Image shown(e.difference.rows() * up, e.difference.cols() * up);
    for (Index r = 0; r < shown.rows(); ++r)
      for (Index c = 0; c < shown.cols(); ++c)
        shown(r, c) = float(0.5 + 0.5 * e.difference(r / up, c / up) / scale);
    const std::string path =
        (std::filesystem::path(dir) / ("difference_" + e.model + ".png")).string();
    write_png16(path, shown);
    paths.push_back(path);
  }
  return paths;
}

void write_roi_bar_chart(const RoiReport& report, const std::string& path) {
  constexpr int kWidth = 640, kHeight = 360, kMargin = 30;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(kWidth * kHeight * 3), 255);
  auto fill = [&](int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
    for (int y = std::max(0, y0); y < std::min(kHeight, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(kWidth, x1); ++x)
        for (int k = 0; k < 3; ++k) rgb[static_cast<std::size_t>((y * kWidth + x) * 3 + k)] = c[k];
  };
  double top = 0;
  for (const auto& e : report.entries) top = std::max(top, e.mean + e.stddev);
  if (top <= 0) top = 1;
  const int plot_h = kHeight - 2 * kMargin;
  auto y_of = [&](double v) { return kHeight - kMargin - int(std::lround(plot_h * v / top)); };
  fill(kMargin, kHeight - kMargin, kWidth - kMargin, kHeight - kMargin + 2, {0, 0, 0});
  fill(kMargin - 2, kMargin, kMargin, kHeight - kMargin, {0, 0, 0});
  static constexpr std::array<std::array<std::uint8_t, 3>, 7> kPalette{{{80, 80, 80},
                                                                        {200, 60, 60},
                                                                        {60, 120, 200},
                                                                        {60, 170, 90},
                                                                        {230, 150, 40},
                                                                        {150, 80, 190},
                                                                        {40, 170, 170}}};
  const int n = std::max<int>(1, static_cast<int>(report.entries.size()));
  const int slot = (kWidth - 2 * kMargin) / n;
  for (int i = 0; i < static_cast<int>(report.entries.size()); ++i) {
    const auto& e = report.entries[static_cast<std::size_t>(i)];
    const int x0 = kMargin + i * slot + slot / 5, x1 = kMargin + (i + 1) * slot - slot / 5;
    fill(x0, y_of(e.mean), x1, kHeight - kMargin, kPalette[static_cast<std::size_t>(i) % kPalette.size()]);
    const int xm = (x0 + x1) / 2;
    const int ylo = y_of(std::max(0.0, e.mean - e.stddev)), yhi = y_of(e.mean + e.stddev);
    fill(xm - 1, yhi, xm + 2, ylo + 1, {0, 0, 0});
    fill(xm - 6, yhi - 1, xm + 7, yhi + 1, {0, 0, 0});
    fill(xm - 6, ylo - 1, xm + 7, ylo + 1, {0, 0, 0});
  }
  write_png_rgb(path, kWidth, kHeight, rgb);
}

void write_report(const std::string& dir, const std::vector<MetricsRow>& rows,
                  const RoiReport* roi) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file_atomic((fs::path(dir) / "metrics.txt").string(), metrics_table(rows));
  write_file_atomic((fs::path(dir) / "metrics.csv").string(), metrics_csv(rows));
  if (roi) {
    write_file_atomic((fs::path(dir) / "roi.csv").string(), roi_csv(*roi));
    write_difference_maps(*roi, dir);
    write_roi_bar_chart(*roi, (fs::path(dir) / "roi_bars.png").string());
  }
}

}  // namespace streakfix
