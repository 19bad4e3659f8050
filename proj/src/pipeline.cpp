#include "streakfix/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

#include "streakfix/report.hpp"

namespace streakfix {

namespace fs = std::filesystem;

std::shared_ptr<const Vgg16Features<float>> load_extractor(const PerceptualConfig& config) {
  if (config.weights.empty()) throw ConfigError("perceptual.weights_path is not set");
  return load_vgg16(config.weights, config.checksum, config.taps);
}

std::vector<std::string> held_out_phantoms(const Dataset& dataset, const RunConfig& config,
                                           int fold) {
  if (fold < 0 || fold >= config.train.folds) {
    throw ConfigError("fold " + std::to_string(fold) + " outside [0, " +
                      std::to_string(config.train.folds - 1) + "]");
  }
  return build_folds(dataset.phantom_ids(), config.train.folds,
                     config.seed)[static_cast<std::size_t>(fold)];
}

std::vector<std::string> read_split(const std::string& path) {
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("held_out")) {
    throw InputError("'" + path + "' is not a split file");
  }
  return j.at("held_out").get<std::vector<std::string>>();
}

std::vector<SampleRecord> select_records(const Dataset& dataset,
                                         const std::vector<std::string>& phantoms) {
  std::vector<SampleRecord> out;
  for (const auto& r : dataset.samples)
    if (phantoms.empty() ||
        std::find(phantoms.begin(), phantoms.end(), r.phantom_id) != phantoms.end())
      out.push_back(r);
  return out;
}

std::vector<FoldResult> run_training(const RunConfig& config, const std::string& dataset_dir,
                                     const std::string& out_dir, std::optional<int> fold) {
  RunConfig c = config;
  c.finalize();
  const Dataset dataset = load_dataset(dataset_dir);
  const auto folds = build_folds(dataset.phantom_ids(), c.train.folds, c.seed);
  if (fold && (*fold < 0 || *fold >= c.train.folds)) {
    throw ConfigError("fold " + std::to_string(*fold) + " outside [0, " +
                      std::to_string(c.train.folds - 1) + "]");
  }
  if (c.train.patch_size > dataset.config.size) {
    throw ConfigError("patch_size " + std::to_string(c.train.patch_size) +
                      " exceeds the dataset slice size " + std::to_string(dataset.config.size));
  }
  std::shared_ptr<const FeatureExtractor<float>> extractor;
  const auto t = traits(c.train.variant);
  if (t.focus || t.regularizer == Regularizer::kPerceptual) extractor = load_extractor(c.perceptual);

  fs::create_directories(out_dir);
  write_file_atomic((fs::path(out_dir) / "config.json").string(), to_json(c).dump(2) + "\n");
  std::vector<FoldResult> results;
  for (int k = 0; k < c.train.folds; ++k) {
    if (fold && k != *fold) continue;
    const std::string dir = (fs::path(out_dir) / ("fold_" + std::to_string(k))).string();
    fs::create_directories(dir);
    std::vector<std::string> train_ids;
    for (int f = 0; f < c.train.folds; ++f)
      if (f != k)
        for (const auto& id : folds[static_cast<std::size_t>(f)]) train_ids.push_back(id);
    std::sort(train_ids.begin(), train_ids.end());
    const nlohmann::json split{{"fold", k},
                               {"held_out", folds[static_cast<std::size_t>(k)]},
                               {"train", train_ids}};
    write_file_atomic((fs::path(dir) / "split.json").string(), split.dump(2) + "\n");
    results.push_back(train_fold(c.train, dataset, k, extractor, dir));
  }
  return results;
}

std::vector<SampleRecord> run_inference(const std::string& checkpoint_path,
                                        const std::string& dataset_dir,
                                        const std::vector<std::string>& phantoms,
                                        const std::string& out_dir,
                                        const std::vector<Index>* expected_widths) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.arch != to_string(Architecture::kGenerator)) {
    throw ConfigError("checkpoint '" + checkpoint_path + "' holds a " + ckpt.arch +
                      ", inference needs a generator");
  }
  if (expected_widths && *expected_widths != ckpt.widths) {
    throw ConfigError("checkpoint generator widths do not match the configured widths");
  }
  auto generator = generator_from_checkpoint(ckpt);
  const Dataset dataset = load_dataset(dataset_dir);
  const auto records = select_records(dataset, phantoms);
  std::vector<Image> inputs;
  for (const auto& r : records) {
    require_divisible(r.height, r.width, 16, "inference");
    inputs.push_back(read_image((fs::path(dataset.root) / r.sparse_path).string()));
  }
  const auto outputs = infer(*generator, inputs);
  write_image_set(out_dir, records, outputs, "generator output of " + checkpoint_path);
  return records;
}

namespace {

std::string sample_key(const SampleRecord& r) { return r.phantom_id + "/" + r.slice_id; }

/// Model outputs aligned with `records`, or nullopt when the source is missing.
std::optional<std::vector<Image>> model_outputs(const ModelSource& m,
                                                const std::vector<SampleRecord>& records,
                                                const std::vector<Image>& sparse) {
  if (!m.checkpoint.empty()) {
    if (!fs::exists(m.checkpoint)) return std::nullopt;
    return infer(load_checkpoint(m.checkpoint), sparse);
  }
  if (!fs::exists(fs::path(m.outputs) / kManifestName)) return std::nullopt;
  auto [set_records, images] = read_image_set(m.outputs);
  std::vector<Image> out;
  for (const auto& r : records) {
    auto it = std::find_if(set_records.begin(), set_records.end(), [&](const SampleRecord& s) {
      return sample_key(s) == sample_key(r);
    });
    if (it == set_records.end()) {
      throw InputError("outputs of '" + m.name + "' lack slice " + sample_key(r));
    }
    const Image& img = images[static_cast<std::size_t>(it - set_records.begin())];
    if (img.rows() != r.height || img.cols() != r.width) {
      throw InputError("outputs of '" + m.name + "' have the wrong shape for " + sample_key(r));
    }
    out.push_back(img);
  }
  return out;
}

}  // namespace

EvalResult evaluate_models(const EvalRequest& request) {
  const Dataset dataset = load_dataset(request.dataset_dir);
  const auto records = select_records(dataset, request.phantoms);
  if (records.empty()) throw InputError("no slices selected for evaluation");
  for (const auto& m : request.models) {
    if (m.name.empty() || m.name == "x_s" || m.name == "x_d")
      throw ConfigError("invalid model name '" + m.name + "'");
    if (m.checkpoint.empty() == m.outputs.empty())
      throw ConfigError("model '" + m.name + "' needs exactly one of a checkpoint or outputs");
  }

  // ROI slice and window, validated before any output exists.
  std::size_t roi_index = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (request.roi_sample ? sample_key(r) == *request.roi_sample
                           : (request.roi || r.roi.height > 0)) {
      roi_index = i;
      break;
    }
  }
  if (request.roi_sample && roi_index == records.size()) {
    throw ConfigError("ROI slice '" + *request.roi_sample + "' is not among the evaluated slices");
  }
  std::optional<Window> window;
  if (roi_index < records.size()) window = request.roi ? *request.roi : records[roi_index].roi;
  if (window) {
    const auto& r = records[roi_index];
    const auto& w = *window;
    if (w.row < 0 || w.col < 0 || w.height <= 0 || w.width <= 0 || w.row + w.height > r.height ||
        w.col + w.width > r.width) {
      throw ConfigError("ROI " + std::to_string(w.row) + "," + std::to_string(w.col) + "," +
                        std::to_string(w.height) + "," + std::to_string(w.width) +
                        " is out of bounds; valid: row+height <= " + std::to_string(r.height) +
                        ", col+width <= " + std::to_string(r.width));
    }
  }

  std::vector<Image> sparse, dense;
  for (const auto& r : records) {
    auto p = dataset.load(r);
    sparse.push_back(std::move(p.sparse));
    dense.push_back(std::move(p.dense));
  }
  std::map<std::string, std::vector<Image>> outputs{{"x_s", sparse}};
  std::vector<std::string> absent;
  for (const auto& m : request.models) {
    auto out = model_outputs(m, records, sparse);
    if (!out) {
      std::cerr << "warning: model '" << m.name << "' is missing; listed as absent\n";
      absent.push_back(m.name);
      continue;
    }
    if (!outputs.emplace(m.name, std::move(*out)).second)
      throw ConfigError("duplicate model name '" + m.name + "'");
  }
  if (!request.models.empty() && absent.size() == request.models.size()) {
    throw IoError("none of the requested models could be found");
  }

  EvalResult result;
  result.rows = evaluate_outputs(dense, outputs, absent);
  if (window) {
    std::map<std::string, Image> slice_outputs;
    for (const auto& [name, imgs] : outputs)
      if (name != "x_s") slice_outputs[name] = imgs[roi_index];
    result.roi = roi_report(dense[roi_index], sparse[roi_index], slice_outputs, *window);
    result.roi_sample = sample_key(records[roi_index]);
  }
  write_report(request.out_dir, result.rows, result.roi ? &*result.roi : nullptr);
  return result;
}

BenchmarkResult run_benchmark(const RunConfig& config, const std::vector<Variant>& variants,
                              int fold, const std::string& out_dir) {
  RunConfig c = config;
  c.finalize();
  if (fold < 0 || fold >= c.train.folds) {
    throw ConfigError("fold " + std::to_string(fold) + " outside [0, " +
                      std::to_string(c.train.folds - 1) + "]");
  }
  if (c.data.phantoms < c.train.folds) {
    throw ConfigError("need at least " + std::to_string(c.train.folds) + " phantoms");
  }
  const std::string data_dir = (fs::path(out_dir) / "data").string();
  const Dataset dataset = build_dataset(c.data, data_dir);
  BenchmarkResult result;
  result.held_out = held_out_phantoms(dataset, c, fold);
  EvalRequest request;
  request.dataset_dir = data_dir;
  request.phantoms = result.held_out;
  for (Variant v : variants) {
    RunConfig vc = c;
    vc.train.variant = v;
    const std::string dir = (fs::path(out_dir) / to_string(v)).string();
    const auto folds = run_training(vc, data_dir, dir, fold);
    request.models.push_back({to_string(v), folds.front().generator_checkpoint, ""});
  }
  result.report_dir = (fs::path(out_dir) / "report").string();
  request.out_dir = result.report_dir;
  result.rows = evaluate_models(request).rows;
  return result;
}

}  // namespace streakfix
