#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "streakfix/errors.hpp"
#include "streakfix/pipeline.hpp"
#include "streakfix/report.hpp"

namespace fs = std::filesystem;
using namespace streakfix;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kConfig = 2, kNumerical = 3 };

std::string executable_dir(const char* argv0) {
  std::error_code ec;
  fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (ec) self = fs::absolute(argv0);
  return self.parent_path().string();
}

/// Flags layered over defaults < --profile < --config < STREAKFIX_SEED.
struct ConfigFlags {
  std::string profile = "full";
  std::string config_path;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--profile", profile, "Built-in defaults: full or desk (128² slices, 10x4 "
                                          "phantom slices, 64x64 patches, 200 patches, 5 epochs)")
        ->capture_default_str();
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Master seed (overrides config and STREAKFIX_SEED)");
  }

  RunConfig resolve() const {
    RunConfig c = default_config(profile_from_string(profile));
    if (!config_path.empty()) apply_config_file(c, config_path);
    apply_environment(c);
    if (seed) c.seed = *seed;
    return c;
  }
};

template <typename T>
void set_if(const CLI::Option* opt, T& target, const T& value) {
  if (opt->count() > 0) target = value;
}

std::optional<Window> parse_window(const std::string& text) {
  if (text.empty()) return std::nullopt;
  Window w;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream is(text);
  if (!(is >> w.row >> c1 >> w.col >> c2 >> w.height >> c3 >> w.width) || c1 != ',' || c2 != ',' ||
      c3 != ',' || !is.eof()) {
    throw ConfigError("--roi expects row,col,height,width, got '" + text + "'");
  }
  return w;
}

std::pair<std::string, std::string> parse_named(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError(std::string(flag) + " expects name=path, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-view CT streak artifact reduction: simulation, training, evaluation"};
  app.require_subcommand(1);
  const RunConfig full = default_config(Profile::kFull);
  const std::string default_weights = (fs::path(executable_dir(argv[0])) / "vgg16_features.ckpt").string();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Simulate paired sparse/dense-view reconstructions");
  ConfigFlags gen_cfg;
  gen_cfg.add(gen);
  DataConfig gd = full.data;
  std::string gen_out, gen_filter = to_string(gd.filter);
  auto* o_phantoms = gen->add_option("--phantoms", gd.phantoms, "Number of phantoms")->capture_default_str();
  auto* o_slices = gen->add_option("--slices", gd.slices, "Slices per phantom")->capture_default_str();
  auto* o_sparse = gen->add_option("--sparse-views", gd.sparse_views, "Views of x_s")->capture_default_str();
  auto* o_dense = gen->add_option("--dense-views", gd.dense_views, "Views of x_d")->capture_default_str();
  auto* o_size = gen->add_option("--size", gd.size, "Slice side in pixels (multiple of 16)")->capture_default_str();
  auto* o_ellipses = gen->add_option("--num-ellipses", gd.num_ellipses, "Ellipsoids per phantom")->capture_default_str();
  auto* o_filter = gen->add_option("--filter", gen_filter, "FBP filter: ram-lak or shepp-logan")->capture_default_str();
  gen->add_option("--out", gen_out, "Dataset directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train one variant with cross-validation");
  ConfigFlags train_cfg;
  train_cfg.add(train);
  TrainConfig tc = full.train;
  std::string variant = to_string(tc.variant), train_data, train_out, train_weights;
  int train_fold_id = -1;
  auto* o_variant = train->add_option("--variant", variant,
      "baseline-mse | baseline-perceptual | ours-focus | ours-fpn | ours-focus-fpn")->capture_default_str();
  auto* o_epochs = train->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
  auto* o_lr = train->add_option("--lr", tc.adam.lr, "Adam learning rate")->capture_default_str();
  auto* o_beta1 = train->add_option("--beta1", tc.adam.beta1, "Adam beta1")->capture_default_str();
  auto* o_beta2 = train->add_option("--beta2", tc.adam.beta2, "Adam beta2")->capture_default_str();
  auto* o_batch = train->add_option("--batch-size", tc.batch_size, "Patch pairs per step")->capture_default_str();
  auto* o_folds = train->add_option("--folds", tc.folds, "Cross-validation folds")->capture_default_str();
  auto* o_patch = train->add_option("--patch-size", tc.patch_size, "Training patch side")->capture_default_str();
  auto* o_patches = train->add_option("--train-patches", tc.train_patches, "Patch pairs per fold")->capture_default_str();
  auto* o_la = train->add_option("--lambda-a", tc.weights.lambda_a, "Adversarial weight")->capture_default_str();
  auto* o_lm = train->add_option("--lambda-m", tc.weights.lambda_m, "MSE weight")->capture_default_str();
  auto* o_lp = train->add_option("--lambda-p", tc.weights.lambda_p, "Perceptual weight")->capture_default_str();
  auto* o_det = train->add_flag("--deterministic", tc.deterministic, "Deterministic mode");
  auto* o_tweights = train->add_option("--weights", train_weights, "Perceptual extractor weights")
                         ->default_str(default_weights);
  train->add_option("--fold", train_fold_id, "Fold to train (-1: all)")->capture_default_str();
  train->add_option("--dataset", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "Output directory")->required();

  // infer
  auto* inf = app.add_subcommand("infer", "Correct sparse-view slices with a trained generator");
  std::string inf_ckpt, inf_data, inf_out, inf_split, inf_config;
  inf->add_option("--checkpoint", inf_ckpt, "Generator checkpoint")->required();
  inf->add_option("--dataset", inf_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  inf->add_option("--split", inf_split, "split.json; only its held-out slices are processed");
  inf->add_option("--config", inf_config, "Run configuration whose generator widths must match")
      ->check(CLI::ExistingFile);
  inf->add_option("--out", inf_out, "Output image-set directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Metrics table, ROI report and plots");
  ConfigFlags eval_cfg;
  eval_cfg.add(ev);
  std::string ev_data, ev_out, ev_split, ev_roi, ev_roi_sample;
  std::vector<std::string> ev_models, ev_outputs;
  int ev_fold = -1;
  ev->add_option("--dataset", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--model", ev_models, "name=generator checkpoint (repeatable)");
  ev->add_option("--outputs", ev_outputs, "name=image-set directory from infer (repeatable)");
  ev->add_option("--split", ev_split, "split.json selecting the held-out phantoms");
  ev->add_option("--fold", ev_fold, "Held-out fold from the configuration (-1: all slices)")->capture_default_str();
  ev->add_option("--roi", ev_roi, "ROI window row,col,height,width (default: bone-like ellipse)");
  ev->add_option("--roi-sample", ev_roi_sample, "Slice for the ROI report, e.g. p003/s02");
  ev->add_option("--out", ev_out, "Report directory")->required();

  // make-weights
  auto* mw = app.add_subcommand("make-weights", "Write the deterministic surrogate extractor weights");
  std::string mw_out;
  std::uint64_t mw_seed = 16;
  int mw_convs = 7;
  mw->add_option("--out", mw_out, "Output path")->required();
  mw->add_option("--seed", mw_seed, "Weight seed")->capture_default_str();
  mw->add_option("--convs", mw_convs, "Convolutions to generate (7 reaches pool3)")->capture_default_str();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Generate data, train the variants on one fold, evaluate");
  ConfigFlags bench_cfg;
  bench_cfg.add(bench);
  std::vector<std::string> bench_variants;
  std::string bench_out, bench_weights;
  int bench_fold = 0;
  bench->add_option("--variants", bench_variants, "Variants (default: all five)");
  bench->add_option("--fold", bench_fold, "Fold to train and hold out")->capture_default_str();
  bench->add_flag("--deterministic", "Deterministic mode");
  auto* o_bweights = bench->add_option("--weights", bench_weights, "Perceptual extractor weights")
                         ->default_str(default_weights);
  bench->add_option("--out", bench_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) {
      RunConfig c = gen_cfg.resolve();
      DataConfig& d = c.data;
      set_if(o_phantoms, d.phantoms, gd.phantoms);
      set_if(o_slices, d.slices, gd.slices);
      set_if(o_sparse, d.sparse_views, gd.sparse_views);
      set_if(o_dense, d.dense_views, gd.dense_views);
      set_if(o_size, d.size, gd.size);
      set_if(o_ellipses, d.num_ellipses, gd.num_ellipses);
      if (o_filter->count()) d.filter = filter_from_string(gen_filter);
      c.data.seed = c.seed;
      c.data.validate();
      const Dataset ds = build_dataset(c.data, gen_out);
      std::cout << "wrote " << ds.samples.size() << " slice pairs to " << gen_out << "\n";
    } else if (train->parsed()) {
      RunConfig c = train_cfg.resolve();
      TrainConfig& t = c.train;
      if (o_variant->count()) t.variant = variant_from_string(variant);
      set_if(o_epochs, t.epochs, tc.epochs);
      set_if(o_lr, t.adam.lr, tc.adam.lr);
      set_if(o_beta1, t.adam.beta1, tc.adam.beta1);
      set_if(o_beta2, t.adam.beta2, tc.adam.beta2);
      set_if(o_batch, t.batch_size, tc.batch_size);
      set_if(o_folds, t.folds, tc.folds);
      set_if(o_patch, t.patch_size, tc.patch_size);
      set_if(o_patches, t.train_patches, tc.train_patches);
      set_if(o_la, t.weights.lambda_a, tc.weights.lambda_a);
      set_if(o_lm, t.weights.lambda_m, tc.weights.lambda_m);
      set_if(o_lp, t.weights.lambda_p, tc.weights.lambda_p);
      set_if(o_det, t.deterministic, tc.deterministic);
      if (o_tweights->count()) c.perceptual.weights = train_weights;
      if (c.perceptual.weights.empty()) c.perceptual.weights = default_weights;
      const auto results = run_training(c, train_data, train_out,
                                        train_fold_id < 0 ? std::nullopt : std::optional<int>(train_fold_id));
      for (const auto& r : results)
        std::cout << "fold checkpoint " << r.generator_checkpoint << " (" << r.steps << " steps)\n";
    } else if (inf->parsed()) {
      std::vector<std::string> phantoms;
      if (!inf_split.empty()) phantoms = read_split(inf_split);
      std::optional<std::vector<Index>> widths;
      if (!inf_config.empty()) {
        RunConfig c;
        apply_config_file(c, inf_config);
        widths = c.train.generator_widths;
      }
      const auto records = run_inference(inf_ckpt, inf_data, phantoms, inf_out, widths ? &*widths : nullptr);
      std::cout << "wrote " << records.size() << " corrected slices to " << inf_out << "\n";
    } else if (ev->parsed()) {
      EvalRequest req;
      req.dataset_dir = ev_data;
      req.out_dir = ev_out;
      req.roi = parse_window(ev_roi);
      if (!ev_roi_sample.empty()) req.roi_sample = ev_roi_sample;
      for (const auto& m : ev_models) {
        auto [name, path] = parse_named(m, "--model");
        req.models.push_back({name, path, ""});
      }
      for (const auto& m : ev_outputs) {
        auto [name, path] = parse_named(m, "--outputs");
        req.models.push_back({name, "", path});
      }
      if (!ev_split.empty()) {
        req.phantoms = read_split(ev_split);
      } else if (ev_fold >= 0) {
        RunConfig c = eval_cfg.resolve();
        c.finalize();
        req.phantoms = held_out_phantoms(load_dataset(ev_data), c, ev_fold);
      }
      const auto result = evaluate_models(req);
      std::cout << metrics_table(result.rows);
      if (result.roi) std::cout << "ROI slice " << result.roi_sample << "\n" << roi_csv(*result.roi);
    } else if (mw->parsed()) {
      const std::string bytes = encode_vgg16_weights(make_surrogate_vgg16(mw_seed, mw_convs));
      write_file_atomic(mw_out, bytes);
      std::cout << mw_out << " checksum " << fnv1a_hex(bytes) << "\n";
    } else if (bench->parsed()) {
      RunConfig c = bench_cfg.resolve();
      if (bench->count("--deterministic")) c.train.deterministic = true;
      if (o_bweights->count()) c.perceptual.weights = bench_weights;
      if (c.perceptual.weights.empty()) c.perceptual.weights = default_weights;
      std::vector<Variant> variants;
      for (const auto& v : bench_variants) variants.push_back(variant_from_string(v));
      if (variants.empty()) variants = all_variants();
      const auto result = run_benchmark(c, variants, bench_fold, bench_out);
      std::cout << metrics_table(result.rows) << "report: " << result.report_dir << "\n";
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
