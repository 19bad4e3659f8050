#include "streakfix/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include "streakfix/image.hpp"

namespace streakfix {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  /// Rejects keys that no `get`/`child` call asked for.
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown configuration key '" + where(key) + "'");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("configuration key '" + where(key) + "' has the wrong type");
    }
  }

  std::optional<Section> child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return std::optional<Section>(std::in_place, j_.at(key), where(key));
  }

 private:
  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "<root>" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require_u64(const json& j, const std::string& key) {
  if (j.contains(key) && !j.at(key).is_number_unsigned() &&
      !(j.at(key).is_number_integer() && j.at(key).get<long long>() >= 0)) {
    throw ConfigError("configuration key '" + key + "' must be a non-negative integer");
  }
}

}  // namespace

void RunConfig::finalize() {
  data.seed = seed;
  train.seed = seed;
  data.validate();
  train.validate();
  if (train.patch_size > data.size) {
    throw ConfigError("train.patch_size " + std::to_string(train.patch_size) +
                      " exceeds data.size " + std::to_string(data.size));
  }
  for (int layer : {perceptual.taps.i, perceptual.taps.j1, perceptual.taps.j2})
    if (layer < 0 || layer > 30) throw ConfigError("perceptual tap layers must lie in [0, 30]");
}

Profile profile_from_string(const std::string& name) {
  if (name == "full") return Profile::kFull;
  if (name == "desk") return Profile::kDesk;
  throw ConfigError("unknown profile '" + name + "' (expected full or desk)");
}

RunConfig default_config(Profile profile) {
  RunConfig c;
  if (profile == Profile::kDesk) {
    c.data.size = 128;
    c.data.phantoms = 10;
    c.data.slices = 4;
    c.train.patch_size = 64;
    c.train.train_patches = 200;
    c.train.epochs = 5;
  }
  return c;
}

void apply_json(RunConfig& config, const json& j) {
  Section root(j, "");
  require_u64(j, "seed");
  root.get("seed", config.seed);
  if (auto s = root.child("data")) {
    auto& d = config.data;
    s->get("phantoms", d.phantoms);
    s->get("slices", d.slices);
    s->get("sparse_views", d.sparse_views);
    s->get("dense_views", d.dense_views);
    s->get("size", d.size);
    s->get("num_ellipses", d.num_ellipses);
    s->get("intensity_lo", d.intensity_lo);
    s->get("intensity_hi", d.intensity_hi);
    std::string filter = to_string(d.filter);
    s->get("filter", filter);
    d.filter = filter_from_string(filter);
    s->finish();
  }
  if (auto s = root.child("train")) {
    auto& t = config.train;
    std::string variant = to_string(t.variant);
    s->get("variant", variant);
    t.variant = variant_from_string(variant);
    s->get("lr", t.adam.lr);
    s->get("beta1", t.adam.beta1);
    s->get("beta2", t.adam.beta2);
    s->get("eps", t.adam.eps);
    s->get("epochs", t.epochs);
    s->get("batch_size", t.batch_size);
    s->get("folds", t.folds);
    s->get("patch_size", t.patch_size);
    s->get("train_patches", t.train_patches);
    s->get("d_steps_per_g", t.d_steps_per_g);
    s->get("deterministic", t.deterministic);
    s->get("generator_widths", t.generator_widths);
    s->get("discriminator_widths", t.discriminator_widths);
    s->get("pyramid_channels", t.pyramid_channels);
    s->get("input_skip", t.generator_input_skip);
    s->finish();
  }
  if (auto s = root.child("loss")) {
    s->get("lambda_a", config.train.weights.lambda_a);
    s->get("lambda_m", config.train.weights.lambda_m);
    s->get("lambda_p", config.train.weights.lambda_p);
    s->finish();
  }
  if (auto s = root.child("perceptual")) {
    s->get("weights_path", config.perceptual.weights);
    s->get("checksum", config.perceptual.checksum);
    s->get("tap_i", config.perceptual.taps.i);
    s->get("tap_j1", config.perceptual.taps.j1);
    s->get("tap_j2", config.perceptual.taps.j2);
    s->finish();
  }
  root.finish();
}

void apply_config_file(RunConfig& config, const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config '" + path + "': " + e.what());
  }
  apply_json(config, j);
}

void apply_environment(RunConfig& config) {
  const char* env = std::getenv("STREAKFIX_SEED");
  if (!env || !*env) return;
  const std::string s(env);
  if (s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("STREAKFIX_SEED must be a non-negative integer, got '" + s + "'");
  }
  try {
    config.seed = std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("STREAKFIX_SEED out of range: '" + s + "'");
  }
}

json to_json(const RunConfig& c) {
  const auto& d = c.data;
  const auto& t = c.train;
  return {
      {"seed", c.seed},
      {"data",
       {{"phantoms", d.phantoms},
        {"slices", d.slices},
        {"sparse_views", d.sparse_views},
        {"dense_views", d.dense_views},
        {"size", d.size},
        {"num_ellipses", d.num_ellipses},
        {"intensity_lo", d.intensity_lo},
        {"intensity_hi", d.intensity_hi},
        {"filter", to_string(d.filter)}}},
      {"train",
       {{"variant", to_string(t.variant)},
        {"lr", t.adam.lr},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"eps", t.adam.eps},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"folds", t.folds},
        {"patch_size", t.patch_size},
        {"train_patches", t.train_patches},
        {"d_steps_per_g", t.d_steps_per_g},
        {"deterministic", t.deterministic},
        {"generator_widths", t.generator_widths},
        {"discriminator_widths", t.discriminator_widths},
        {"pyramid_channels", t.pyramid_channels},
        {"input_skip", t.generator_input_skip}}},
      {"loss",
       {{"lambda_a", t.weights.lambda_a},
        {"lambda_m", t.weights.lambda_m},
        {"lambda_p", t.weights.lambda_p}}},
      {"perceptual",
       {{"weights_path", c.perceptual.weights},
        {"checksum", c.perceptual.checksum},
        {"tap_i", c.perceptual.taps.i},
        {"tap_j1", c.perceptual.taps.j1},
        {"tap_j2", c.perceptual.taps.j2}}},
  };
}

}  // namespace streakfix
