#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "streakfix/dataset.hpp"
#include "streakfix/perceptual.hpp"
#include "streakfix/training.hpp"

namespace streakfix {

struct PerceptualConfig {
  std::string weights;  // empty: the default next to the executable
  std::string checksum = kSurrogateWeightsChecksum;  // empty: skip verification
  TapLayers taps{};
};

/// Everything a run needs. Serialized as
///   {seed, data:{...}, train:{...}, loss:{...}, perceptual:{...}}
/// with every key optional and unknown keys rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data{};
  TrainConfig train{};
  PerceptualConfig perceptual{};

  /// Copies `seed` into the data and train sections, then range-checks everything.
  void finalize();
};

enum class Profile { kFull, kDesk };
Profile profile_from_string(const std::string& name);

/// Built-in defaults for a profile. `desk` uses 128² slices (10 phantoms x 4
/// slices), 64x64 patches, 200 training patches and 5 epochs.
RunConfig default_config(Profile profile = Profile::kFull);

/// Overlays the keys present in `j` onto `config`. Unknown keys or wrongly typed
/// values raise ConfigError naming the offending key.
void apply_json(RunConfig& config, const nlohmann::json& j);
void apply_config_file(RunConfig& config, const std::string& path);
/// Applies STREAKFIX_SEED when set.
void apply_environment(RunConfig& config);

nlohmann::json to_json(const RunConfig& config);

}  // namespace streakfix
