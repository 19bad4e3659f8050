#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "streakfix/tomo.hpp"

namespace streakfix {

/// Seed derivation for independent per-item RNG streams (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct DataConfig {
  int phantoms = 27;
  int slices = 8;
  int sparse_views = 67;
  int dense_views = 200;
  int size = 384;
  int num_ellipses = 6;
  double intensity_lo = 0.1;
  double intensity_hi = 0.9;
  std::uint64_t seed = 0;
  FilterKind filter = FilterKind::kRamLak;

  void validate() const;
};

/// One manifest entry; paths are relative to the dataset directory.
struct SampleRecord {
  std::string phantom_id;
  std::string slice_id;
  std::string sparse_path;
  std::string dense_path;
  int width = 0;
  int height = 0;
  Window roi;
};

struct Dataset {
  std::string root;
  DataConfig config;
  std::vector<SampleRecord> samples;

  /// Distinct phantom ids in first-appearance order.
  std::vector<std::string> phantom_ids() const;
  PairedSample load(const SampleRecord& record) const;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Simulates `config.phantoms` phantoms x `config.slices` slices and writes the
/// container into `out_dir` (manifest last). Validates before touching disk.
Dataset build_dataset(const DataConfig& config, const std::string& out_dir);
Dataset load_dataset(const std::string& dir);

/// Writes a dataset-style directory of single images (inference outputs).
void write_image_set(const std::string& dir, const std::vector<SampleRecord>& records,
                     const std::vector<Image>& images, const std::string& description);
/// Reads an image set written by write_image_set: (records, images).
std::pair<std::vector<SampleRecord>, std::vector<Image>> read_image_set(const std::string& dir);

}  // namespace streakfix
