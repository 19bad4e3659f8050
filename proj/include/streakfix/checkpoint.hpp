#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "streakfix/networks.hpp"
#include "streakfix/perceptual.hpp"

namespace streakfix {

/// Checkpoint container:
///   "SVCK" | u32 version=1 | u32 metadata_length | metadata JSON | tensor payloads
/// The metadata JSON holds {arch, widths, seed, epoch, extra, tensors:[{name, shape}]};
/// payloads are float32 little-endian, concatenated in the listed order.
struct Checkpoint {
  std::string arch;
  std::vector<Index> widths;
  std::uint64_t seed = 0;
  int epoch = 0;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<std::pair<std::string, NamedTensor>> tensors;

  const NamedTensor* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Parameters and buffers of `net` in visit order.
template <typename Scalar>
Checkpoint snapshot(Network<Scalar>& net, std::uint64_t seed, int epoch) {
  Checkpoint ckpt;
  ckpt.arch = to_string(net.architecture());
  ckpt.widths = net.widths();
  ckpt.seed = seed;
  ckpt.epoch = epoch;
  auto add = [&ckpt](const std::string& name, const std::vector<Index>& shape,
                     const Vector<Scalar>& value) {
    NamedTensor t;
    t.shape = shape;
    t.data.resize(static_cast<std::size_t>(value.size()));
    Eigen::Map<Vector<float>>(t.data.data(), value.size()) = value.template cast<float>();
    ckpt.tensors.emplace_back(name, std::move(t));
  };
  net.visit([&](const std::string& name, nn::Parameter<Scalar>& p) { add(name, p.shape, p.value); });
  net.visit_buffers([&](const std::string& name, nn::Buffer<Scalar>& b) { add(name, b.shape, b.value); });
  return ckpt;
}

/// Copies every parameter and buffer of `net` from `ckpt`; names and shapes must match.
template <typename Scalar>
void restore(Network<Scalar>& net, const Checkpoint& ckpt) {
  if (ckpt.arch != to_string(net.architecture())) {
    throw ConfigError("checkpoint architecture '" + ckpt.arch + "' does not match '" +
                      to_string(net.architecture()) + "'");
  }
  auto load = [&ckpt](const std::string& name, const std::vector<Index>& shape,
                      Vector<Scalar>& value) {
    const NamedTensor* t = ckpt.find(name);
    if (!t) throw ConfigError("checkpoint lacks tensor '" + name + "'");
    if (t->shape != shape) throw ConfigError("checkpoint tensor '" + name + "' has wrong shape");
    value = Eigen::Map<const Vector<float>>(t->data.data(), value.size()).template cast<Scalar>();
  };
  net.visit([&](const std::string& name, nn::Parameter<Scalar>& p) { load(name, p.shape, p.value); });
  net.visit_buffers([&](const std::string& name, nn::Buffer<Scalar>& b) { load(name, b.shape, b.value); });
}

/// Builds a generator from a checkpoint (arch must be "generator").
std::unique_ptr<Generator<float>> generator_from_checkpoint(const Checkpoint& ckpt);

}  // namespace streakfix
