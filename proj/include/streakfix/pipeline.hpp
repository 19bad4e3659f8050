#pragma once

#include <optional>
#include <string>
#include <vector>

#include "streakfix/config.hpp"
#include "streakfix/metrics.hpp"
#include "streakfix/training.hpp"

namespace streakfix {

/// Loads the extractor named by `config.perceptual`, verifying its checksum.
std::shared_ptr<const Vgg16Features<float>> load_extractor(const PerceptualConfig& config);

/// Phantom ids held out by fold `fold` of `config.train.folds`.
std::vector<std::string> held_out_phantoms(const Dataset& dataset, const RunConfig& config,
                                           int fold);
/// Reads the held-out ids from a `split.json` written by `run_training`.
std::vector<std::string> read_split(const std::string& path);

/// Records whose phantom is listed (all records when `phantoms` is empty).
std::vector<SampleRecord> select_records(const Dataset& dataset,
                                         const std::vector<std::string>& phantoms);

/// Trains `fold` (or every fold) into `out_dir/fold_<k>/`, alongside the
/// resolved configuration (`config.json`) and the fold split (`split.json`).
std::vector<FoldResult> run_training(const RunConfig& config, const std::string& dataset_dir,
                                     const std::string& out_dir, std::optional<int> fold);

/// Runs the checkpoint's generator over the sparse-view slices of the selected
/// records and writes them as an image set.
std::vector<SampleRecord> run_inference(const std::string& checkpoint_path,
                                        const std::string& dataset_dir,
                                        const std::vector<std::string>& phantoms,
                                        const std::string& out_dir,
                                        const std::vector<Index>* expected_widths = nullptr);

/// A model to evaluate: a generator checkpoint, or an image set written by `run_inference`.
struct ModelSource {
  std::string name;
  std::string checkpoint;
  std::string outputs;
};

struct EvalRequest {
  std::string dataset_dir;
  std::vector<std::string> phantoms;  // empty: every slice
  std::vector<ModelSource> models;
  std::optional<Window> roi;           // default: bone-like ellipse of the ROI slice
  std::optional<std::string> roi_sample;  // "p003/s02"; default: first selected slice with an ROI
  std::string out_dir;
};

struct EvalResult {
  std::vector<MetricsRow> rows;  // includes the identity row "x_s"
  std::optional<RoiReport> roi;
  std::string roi_sample;
};

/// Mean SSIM/PSNR/RMSE against x_d per model plus the ROI report; writes
/// `metrics.txt`, `metrics.csv`, `roi.csv` and PNG plots into `out_dir`.
/// Models whose checkpoint or outputs are missing become absent rows.
EvalResult evaluate_models(const EvalRequest& request);

struct BenchmarkResult {
  std::vector<MetricsRow> rows;
  std::vector<std::string> held_out;
  std::string report_dir;
};

/// Generates the dataset, trains every variant on `fold`, and evaluates the
/// held-out slices. Layout: out_dir/{data, <variant>/fold_<k>, report}.
BenchmarkResult run_benchmark(const RunConfig& config, const std::vector<Variant>& variants,
                              int fold, const std::string& out_dir);

}  // namespace streakfix
