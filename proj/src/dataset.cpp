#include "streakfix/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "streakfix/errors.hpp"

namespace streakfix {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void DataConfig::validate() const {
  if (phantoms < 0) throw ConfigError("data: phantoms must be >= 0");
  if (slices < 1) throw ConfigError("data: slices must be >= 1");
  if (sparse_views < 1) throw ConfigError("data: sparse_views must be >= 1");
  if (sparse_views >= dense_views) {
    throw ConfigError("data: sparse_views (" + std::to_string(sparse_views) +
                      ") must be fewer than dense_views (" + std::to_string(dense_views) + ")");
  }
  if (size < 16 || size % 16 != 0) throw ConfigError("data: size must be a positive multiple of 16");
  PhantomSpec{num_ellipses, intensity_lo, intensity_hi, size, seed}.validate();
}

namespace {

std::string make_id(char prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, i);
  return buf;
}

json to_json(const DataConfig& c) {
  return {{"phantoms", c.phantoms},       {"slices", c.slices},
          {"sparse_views", c.sparse_views}, {"dense_views", c.dense_views},
          {"size", c.size},               {"num_ellipses", c.num_ellipses},
          {"intensity_lo", c.intensity_lo}, {"intensity_hi", c.intensity_hi},
          {"seed", c.seed},               {"filter", to_string(c.filter)}};
}

DataConfig data_config_from_json(const json& j) {
  DataConfig c;
  c.phantoms = j.at("phantoms");
  c.slices = j.at("slices");
  c.sparse_views = j.at("sparse_views");
  c.dense_views = j.at("dense_views");
  c.size = j.at("size");
  c.num_ellipses = j.at("num_ellipses");
  c.intensity_lo = j.at("intensity_lo");
  c.intensity_hi = j.at("intensity_hi");
  c.seed = j.at("seed");
  c.filter = filter_from_string(j.at("filter"));
  return c;
}

json to_json(const SampleRecord& r) {
  json j = {{"phantom_id", r.phantom_id}, {"slice_id", r.slice_id},
            {"sparse_path", r.sparse_path}, {"dense_path", r.dense_path},
            {"width", r.width},           {"height", r.height}};
  j["roi"] = {r.roi.row, r.roi.col, r.roi.height, r.roi.width};
  return j;
}

SampleRecord record_from_json(const json& j) {
  SampleRecord r;
  r.phantom_id = j.at("phantom_id");
  r.slice_id = j.at("slice_id");
  r.sparse_path = j.value("sparse_path", "");
  r.dense_path = j.value("dense_path", "");
  r.width = j.at("width");
  r.height = j.at("height");
  if (j.contains("roi")) {
    const auto& roi = j.at("roi");
    r.roi = {roi.at(0), roi.at(1), roi.at(2), roi.at(3)};
  }
  return r;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'" +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

json read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / kManifestName).string();
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

std::vector<std::string> Dataset::phantom_ids() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : samples)
    if (seen.insert(s.phantom_id).second) out.push_back(s.phantom_id);
  return out;
}

PairedSample Dataset::load(const SampleRecord& record) const {
  PairedSample pair;
  pair.sparse = read_image((fs::path(root) / record.sparse_path).string());
  pair.dense = read_image((fs::path(root) / record.dense_path).string());
  if (pair.sparse.cols() != record.width || pair.sparse.rows() != record.height ||
      pair.dense.cols() != record.width || pair.dense.rows() != record.height) {
    throw IoError("sample " + record.phantom_id + "/" + record.slice_id +
                  ": image size disagrees with manifest");
  }
  pair.phantom_id = record.phantom_id;
  pair.slice_id = record.slice_id;
  pair.roi = record.roi;
  return pair;
}

Dataset build_dataset(const DataConfig& config, const std::string& out_dir) {
  config.validate();
  ensure_directory(out_dir);

  Dataset ds{out_dir, config, {}};
  for (int p = 0; p < config.phantoms; ++p) {
    const PhantomSpec spec{config.num_ellipses, config.intensity_lo, config.intensity_hi,
                           config.size, derive_seed(config.seed, static_cast<std::uint64_t>(p))};
    const std::string phantom_id = make_id('p', p, 3);
    for (int s = 0; s < config.slices; ++s) {
      const double z = config.slices == 1 ? 0.0 : -0.5 + static_cast<double>(s) / (config.slices - 1);
      const Phantom phantom = make_phantom_slice(spec, z);
      PairedSample pair = make_pair(phantom.image, config.sparse_views, config.dense_views, config.filter);
      SampleRecord rec;
      rec.phantom_id = phantom_id;
      rec.slice_id = make_id('s', s, 2);
      rec.sparse_path = phantom_id + "_" + rec.slice_id + "_sparse.svcb";
      rec.dense_path = phantom_id + "_" + rec.slice_id + "_dense.svcb";
      rec.width = rec.height = config.size;
      rec.roi = phantom.bone;
      if (rec.roi.height == 0) rec.roi = {0, 0, config.size, config.size};
      write_image((fs::path(out_dir) / rec.sparse_path).string(), pair.sparse);
      write_image((fs::path(out_dir) / rec.dense_path).string(), pair.dense);
      ds.samples.push_back(std::move(rec));
    }
  }

  json manifest;
  manifest["format"] = "svcb-dataset";
  manifest["version"] = 1;
  manifest["config"] = to_json(config);
  manifest["counts"] = {{"phantoms", config.phantoms},
                        {"samples", ds.samples.size()},
                        {"sparse_views", config.sparse_views},
                        {"dense_views", config.dense_views}};
  json samples = json::array();
  for (const auto& r : ds.samples) samples.push_back(to_json(r));
  manifest["samples"] = samples;
  write_file_atomic((fs::path(out_dir) / kManifestName).string(), manifest.dump(2) + "\n");
  return ds;
}

Dataset load_dataset(const std::string& dir) {
  const json manifest = read_manifest(dir);
  Dataset ds;
  ds.root = dir;
  try {
    if (manifest.at("format") != "svcb-dataset") throw IoError("'" + dir + "' is not a dataset");
    ds.config = data_config_from_json(manifest.at("config"));
    for (const auto& s : manifest.at("samples")) ds.samples.push_back(record_from_json(s));
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in '" + dir + "': " + e.what());
  }
  return ds;
}

void write_image_set(const std::string& dir, const std::vector<SampleRecord>& records,
                     const std::vector<Image>& images, const std::string& description) {
  if (records.size() != images.size()) throw InputError("write_image_set: count mismatch");
  ensure_directory(dir);
  json samples = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    SampleRecord r = records[i];
    r.sparse_path.clear();
    r.dense_path = r.phantom_id + "_" + r.slice_id + ".svcb";
    r.width = static_cast<int>(images[i].cols());
    r.height = static_cast<int>(images[i].rows());
    write_image((fs::path(dir) / r.dense_path).string(), images[i]);
    json j = to_json(r);
    j.erase("sparse_path");
    j.erase("dense_path");
    j["path"] = r.dense_path;
    samples.push_back(j);
  }
  json manifest = {{"format", "svcb-images"}, {"version", 1}, {"description", description},
                   {"samples", samples}};
  write_file_atomic((fs::path(dir) / kManifestName).string(), manifest.dump(2) + "\n");
}

std::pair<std::vector<SampleRecord>, std::vector<Image>> read_image_set(const std::string& dir) {
  const json manifest = read_manifest(dir);
  std::pair<std::vector<SampleRecord>, std::vector<Image>> out;
  try {
    if (manifest.at("format") != "svcb-images") throw IoError("'" + dir + "' is not an image set");
    for (const auto& s : manifest.at("samples")) {
      SampleRecord r = record_from_json(s);
      r.dense_path = s.at("path");
      out.second.push_back(read_image((fs::path(dir) / r.dense_path).string()));
      out.first.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in '" + dir + "': " + e.what());
  }
  return out;
}

}  // namespace streakfix
