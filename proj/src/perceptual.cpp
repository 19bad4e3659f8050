#include "streakfix/perceptual.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "streakfix/checkpoint.hpp"
#include "streakfix/image.hpp"

namespace streakfix {

// FNV-1a-64 of the file written by `streakfix make-weights` with default arguments.
const char* const kSurrogateWeightsChecksum = "6196293d40dad7c4";

std::string to_string(TapName tap) {
  switch (tap) {
    case TapName::kI: return "TAP_I";
    case TapName::kJ1: return "TAP_J1";
    case TapName::kJ2: return "TAP_J2";
  }
  return "TAP_?";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::map<std::string, NamedTensor> make_surrogate_vgg16(std::uint64_t seed, int num_convs) {
  if (num_convs < 1 || num_convs > 13) throw ConfigError("surrogate VGG16: 1..13 convolutions");
  std::mt19937_64 rng(seed);
  std::map<std::string, NamedTensor> out;
  Index in = 3;
  int layer = 0, made = 0;
  for (int entry : Vgg16Features<float>::kConfig) {
    if (entry < 0) {
      ++layer;
      continue;
    }
    if (made == num_convs) break;
    std::normal_distribution<float> normal(0.0f, static_cast<float>(std::sqrt(2.0 / (in * 9))));
    NamedTensor w{{entry, in, 3, 3}, std::vector<float>(static_cast<std::size_t>(entry * in * 9))};
    for (float& v : w.data) v = normal(rng);
    NamedTensor b{{entry}, std::vector<float>(static_cast<std::size_t>(entry), 0.0f)};
    out["features." + std::to_string(layer) + ".weight"] = std::move(w);
    out["features." + std::to_string(layer) + ".bias"] = std::move(b);
    in = entry;
    layer += 2;
    ++made;
  }
  return out;
}

std::string encode_vgg16_weights(const std::map<std::string, NamedTensor>& weights) {
  Checkpoint ckpt;
  ckpt.arch = "vgg16-features";
  for (const auto& [name, t] : weights) ckpt.tensors.emplace_back(name, t);
  return encode_checkpoint(ckpt);
}

std::shared_ptr<const Vgg16Features<float>> load_vgg16(const std::string& path,
                                                       const std::string& expected_checksum,
                                                       TapLayers taps) {
  if (!std::filesystem::exists(path)) {
    throw IoError("perceptual weights not found at '" + path +
                  "' (generate them with `streakfix make-weights --out " + path +
                  "` or set perceptual.weights_path)");
  }
  const std::string bytes = read_file(path);
  if (!expected_checksum.empty()) {
    const std::string actual = fnv1a_hex(bytes);
    if (actual != expected_checksum) {
      throw IoError("perceptual weights '" + path + "' checksum " + actual + " != expected " +
                    expected_checksum);
    }
  }
  const Checkpoint ckpt = decode_checkpoint(bytes, path);
  if (ckpt.arch != "vgg16-features") {
    throw IoError("'" + path + "' holds '" + ckpt.arch + "', not vgg16-features weights");
  }
  std::map<std::string, NamedTensor> weights(ckpt.tensors.begin(), ckpt.tensors.end());
  return std::make_shared<const Vgg16Features<float>>(weights, taps);
}

}  // namespace streakfix
