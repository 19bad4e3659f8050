#include "streakfix/training.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace streakfix {

namespace {

struct VariantInfo {
  Variant variant;
  const char* name;
  VariantTraits traits;
};

constexpr VariantInfo kVariants[] = {
    {Variant::kBaselineMse, "baseline-mse",
     {Architecture::kDiscriminatorA, false, Regularizer::kMse}},
    {Variant::kBaselinePerceptual, "baseline-perceptual",
     {Architecture::kDiscriminatorA, false, Regularizer::kPerceptual}},
    {Variant::kOursFocus, "ours-focus",
     {Architecture::kDiscriminatorA, true, Regularizer::kPerceptual}},
    {Variant::kOursFpn, "ours-fpn",
     {Architecture::kDiscriminatorB, false, Regularizer::kPerceptual}},
    {Variant::kOursFocusFpn, "ours-focus-fpn",
     {Architecture::kDiscriminatorB, true, Regularizer::kPerceptual}},
};

const VariantInfo& info(Variant v) {
  for (const auto& i : kVariants)
    if (i.variant == v) return i;
  throw ConfigError("unknown variant");
}

std::string epoch_name(const char* prefix, int epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_epoch_%03d.ckpt", prefix, epoch);
  return buf;
}

}  // namespace

std::string to_string(Variant v) { return info(v).name; }

Variant variant_from_string(const std::string& name) {
  for (const auto& i : kVariants)
    if (name == i.name) return i.variant;
  std::string names;
  for (const auto& i : kVariants) names += std::string(names.empty() ? "" : ", ") + i.name;
  throw ConfigError("unknown variant '" + name + "' (expected one of: " + names + ")");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::kBaselineMse, Variant::kBaselinePerceptual,
                                      Variant::kOursFocus, Variant::kOursFpn,
                                      Variant::kOursFocusFpn};
  return v;
}

VariantTraits traits(Variant v) { return info(v).traits; }

void TrainConfig::validate() const {
  auto positive = [](double v) { return v > 0 && std::isfinite(v); };
  if (!positive(adam.lr)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!positive(adam.eps)) throw ConfigError("eps must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (!(weights.lambda_a >= 0) || !(weights.lambda_m >= 0) || !(weights.lambda_p >= 0))
    throw ConfigError("loss weights must be non-negative");
  if (patch_size <= 0 || patch_size % 16 != 0)
    throw ConfigError("patch_size must be a positive multiple of 16, got " +
                      std::to_string(patch_size));
  if (train_patches <= 0) throw ConfigError("train_patches must be positive");
  if (d_steps_per_g <= 0) throw ConfigError("d_steps_per_g must be positive");
  require_widths(generator_widths, 4, "generator");
  require_widths(discriminator_widths, 3, "discriminator");
  if (pyramid_channels <= 0) throw ConfigError("pyramid_channels must be positive");
}

std::vector<std::vector<std::string>> build_folds(const std::vector<std::string>& phantom_ids,
                                                  int folds, std::uint64_t seed) {
  if (folds <= 0) throw ConfigError("folds must be positive");
  if (static_cast<int>(phantom_ids.size()) < folds) {
    throw ConfigError("need at least " + std::to_string(folds) + " phantoms for " +
                      std::to_string(folds) + " folds, have " +
                      std::to_string(phantom_ids.size()));
  }
  std::vector<std::string> ids = phantom_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ConfigError("duplicate phantom id");
  std::mt19937_64 rng(derive_seed(seed, 0xF01D));
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < ids.size(); ++i) out[i % out.size()].push_back(ids[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

std::vector<PatchPair> training_patches(const Dataset& dataset,
                                        const std::vector<std::string>& train_phantoms,
                                        const TrainConfig& config) {
  std::vector<const SampleRecord*> records;
  for (const auto& r : dataset.samples)
    if (std::find(train_phantoms.begin(), train_phantoms.end(), r.phantom_id) !=
        train_phantoms.end())
      records.push_back(&r);
  if (records.empty()) throw ConfigError("no training slices in this fold");
  const int n = static_cast<int>(records.size());
  std::vector<PatchPair> out;
  out.reserve(static_cast<std::size_t>(config.train_patches));
  for (int i = 0; i < n; ++i) {
    const int count = config.train_patches / n + (i < config.train_patches % n ? 1 : 0);
    if (count == 0) continue;
    const PairedSample pair = dataset.load(*records[static_cast<std::size_t>(i)]);
    auto crops = crop_patches(pair, config.patch_size, count,
                              derive_seed(config.seed, 0xC000 + static_cast<std::uint64_t>(i)));
    for (auto& c : crops) out.push_back(std::move(c));
  }
  return out;
}

namespace {

nlohmann::json log_record(int fold, int epoch, int step, const StepLosses<float>& l,
                          double wall) {
  nlohmann::json j;
  j["fold"] = fold;
  j["epoch"] = epoch;
  j["step"] = step;
  j["adv_d"] = l.adv_d;
  j["adv_g"] = l.adv_g;
  if (l.perceptual) j["perceptual"] = *l.perceptual;
  if (l.mse) j["mse"] = *l.mse;
  if (!l.focus_max.empty()) j["focus_max"] = l.focus_max;
  j["wall_time_s"] = wall;
  return j;
}

}  // namespace

FoldResult train_fold(const TrainConfig& config, const Dataset& dataset, int fold_id,
                      std::shared_ptr<const FeatureExtractor<float>> extractor,
                      const std::string& out_dir) {
  config.validate();
  const auto folds = build_folds(dataset.phantom_ids(), config.folds, config.seed);
  if (fold_id < 0 || fold_id >= config.folds) {
    throw ConfigError("fold must lie in [0, " + std::to_string(config.folds - 1) + "]");
  }
  FoldResult result;
  result.held_out_phantoms = folds[static_cast<std::size_t>(fold_id)];
  std::vector<std::string> train_ids;
  for (int f = 0; f < config.folds; ++f)
    if (f != fold_id)
      for (const auto& id : folds[static_cast<std::size_t>(f)]) train_ids.push_back(id);

  AdversarialTrainer<float> trainer(config, std::move(extractor));
  const auto patches = config.epochs > 0 ? training_patches(dataset, train_ids, config)
                                         : std::vector<PatchPair>{};

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  result.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + result.log_path);

  auto save = [&](int epoch) {
    auto g = snapshot(trainer.generator(), config.seed, epoch);
    g.extra["input_skip"] = trainer.generator().input_skip();
    g.extra["variant"] = to_string(config.variant);
    g.extra["fold"] = fold_id;
    const std::string g_bytes = encode_checkpoint(g);
    write_file_atomic((fs::path(out_dir) / epoch_name("generator", epoch)).string(), g_bytes);
    auto d = snapshot(trainer.discriminator(), config.seed, epoch);
    d.extra["variant"] = to_string(config.variant);
    d.extra["fold"] = fold_id;
    save_checkpoint((fs::path(out_dir) / epoch_name("discriminator", epoch)).string(), d);
    result.generator_checkpoint = (fs::path(out_dir) / "generator.ckpt").string();
    write_file_atomic(result.generator_checkpoint, g_bytes);
  };

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.epochs == 0) save(0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, 0xE000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      std::vector<Image> sparse, dense;
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                     order.begin() + static_cast<std::ptrdiff_t>(e));
      for (std::size_t k : batch) {
        sparse.push_back(patches[k].pair.sparse);
        dense.push_back(patches[k].pair.dense);
      }
      StepLosses<float> losses;
      try {
        losses = trainer.step(to_batch<float>(sparse), to_batch<float>(dense));
      } catch (const NumericalError& err) {
        nlohmann::json diag = nlohmann::json::parse(err.diagnostics(), nullptr, false);
        if (diag.is_discarded() || !diag.is_object()) diag = nlohmann::json::object();
        diag["error"] = err.what();
        diag["fold"] = fold_id;
        diag["epoch"] = epoch;
        diag["step"] = trainer.steps();
        nlohmann::json items = nlohmann::json::array();
        for (std::size_t k : batch) {
          items.push_back({{"patch", k},
                           {"phantom_id", patches[k].pair.phantom_id},
                           {"slice_id", patches[k].pair.slice_id},
                           {"row", patches[k].window.row},
                           {"col", patches[k].window.col}});
        }
        diag["batch"] = items;
        const std::string path = (fs::path(out_dir) / "diagnostics.json").string();
        write_file_atomic(path, diag.dump(2) + "\n");
        throw NumericalError(std::string(err.what()) + " (diagnostics: " + path + ")", diag.dump());
      }
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log << log_record(fold_id, epoch, trainer.steps(), losses, wall).dump() << '\n';
    }
    log.flush();
    save(epoch);
  }
  result.steps = trainer.steps();
  return result;
}

std::vector<Image> infer(Generator<float>& generator, const std::vector<Image>& images) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    require_divisible(img.rows(), img.cols(), 16, "inference");
    out.push_back(from_batch(generator.forward(to_batch<float>({img}), false), 0));
  }
  return out;
}

std::vector<Image> infer(const Checkpoint& checkpoint, const std::vector<Image>& images) {
  auto g = generator_from_checkpoint(checkpoint);
  return infer(*g, images);
}

}  // namespace streakfix
