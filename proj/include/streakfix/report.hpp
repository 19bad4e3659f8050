#pragma once

#include <string>
#include <vector>

#include "streakfix/metrics.hpp"

namespace streakfix {

/// Aligned plain-text table; RMSE is printed in units of 1e-2.
std::string metrics_table(const std::vector<MetricsRow>& rows);
/// `model,ssim,psnr_db,rmse`; absent models have empty fields, PSNR of identical
/// images is written as `inf`.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

/// `model,mean,stddev` plus the window in a leading comment line.
std::string roi_csv(const RoiReport& report);

/// Difference maps of every ROI entry as 16-bit PNGs on one shared symmetric
/// scale (mid-gray is zero), upscaled by nearest neighbour to at least 128 px.
/// Returns the written paths.
std::vector<std::string> write_difference_maps(const RoiReport& report, const std::string& dir);

/// Bar chart of ROI mean with ±1 standard deviation whiskers, one bar per entry.
void write_roi_bar_chart(const RoiReport& report, const std::string& path);

/// Writes metrics.txt, metrics.csv and, when `roi` is given, roi.csv and the plots.
void write_report(const std::string& dir, const std::vector<MetricsRow>& rows,
                  const RoiReport* roi);

}  // namespace streakfix
