#include "streakfix/checkpoint.hpp"

#include <cstring>

#include "streakfix/image.hpp"

namespace streakfix {

namespace {
constexpr char kMagic[4] = {'S', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kGenerator: return "generator";
    case Architecture::kDiscriminatorA: return "discriminator-a";
    case Architecture::kDiscriminatorB: return "discriminator-b";
  }
  return "unknown";
}

Architecture architecture_from_string(const std::string& name) {
  if (name == "generator") return Architecture::kGenerator;
  if (name == "discriminator-a") return Architecture::kDiscriminatorA;
  if (name == "discriminator-b") return Architecture::kDiscriminatorB;
  throw ConfigError("unknown architecture '" + name + "'");
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["arch"] = ckpt.arch;
  meta["widths"] = ckpt.widths;
  meta["seed"] = ckpt.seed;
  meta["epoch"] = ckpt.epoch;
  meta["extra"] = ckpt.extra;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.tensors) index.push_back({{"name", name}, {"shape", t.shape}});
  meta["tensors"] = index;
  const std::string text = meta.dump();

  std::string out(kMagic, 4);
  auto put = [&out](std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
  };
  put(kVersion);
  put(static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& [name, t] : ckpt.tensors)
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
  auto fail = [&origin](const std::string& why) -> IoError {
    return IoError("checkpoint '" + origin + "': " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw fail("bad magic");
  std::uint32_t version, length;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&length, bytes.data() + 8, 4);
  if (version != kVersion) throw fail("unsupported version " + std::to_string(version));
  if (bytes.size() < 12 + std::size_t(length)) throw fail("truncated metadata");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(12, length));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("metadata is not valid JSON: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.arch = meta.at("arch").get<std::string>();
    ckpt.widths = meta.at("widths").get<std::vector<Index>>();
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.epoch = meta.at("epoch").get<int>();
    if (meta.contains("extra")) ckpt.extra = meta.at("extra");
    std::size_t offset = 12 + length;
    for (const auto& entry : meta.at("tensors")) {
      NamedTensor t;
      t.shape = entry.at("shape").get<std::vector<Index>>();
      std::size_t count = 1;
      for (Index d : t.shape) count *= static_cast<std::size_t>(d);
      if (offset + count * sizeof(float) > bytes.size()) throw fail("truncated tensor payload");
      t.data.resize(count);
      std::memcpy(t.data.data(), bytes.data() + offset, count * sizeof(float));
      offset += count * sizeof(float);
      ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    if (offset != bytes.size()) throw fail("trailing bytes after tensor payloads");
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed metadata: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

std::unique_ptr<Generator<float>> generator_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.arch != "generator") {
    throw ConfigError("checkpoint holds a '" + ckpt.arch + "', not a generator");
  }
  const bool skip = ckpt.extra.value("input_skip", true);
  auto g = std::make_unique<Generator<float>>(ckpt.widths, skip);
  restore(*g, ckpt);
  return g;
}

}  // namespace streakfix
