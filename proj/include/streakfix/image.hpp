#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "streakfix/tensor.hpp"

namespace streakfix {

/// 2D grayscale slice, row-major, nominal range [0,1].
using Image = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Image file: 16-byte header {"SVCB", u32 version=1, u32 width, u32 height}
/// (little-endian) then width*height float32 LE row-major.
inline constexpr char kImageMagic[4] = {'S', 'V', 'C', 'B'};
inline constexpr std::uint32_t kImageVersion = 1;

void write_image(const std::string& path, const Image& image);
Image read_image(const std::string& path);

/// 16-bit grayscale PNG; values clipped to [0,1].
void write_png16(const std::string& path, const Image& image);
/// 8-bit RGB PNG from interleaved rgb bytes.
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

/// Stacks images into a (N, 1, H, W) tensor; all images must share one shape.
template <typename Scalar = float>
Tensor<Scalar> to_batch(const std::vector<Image>& images) {
  if (images.empty()) return {};
  const Index h = images.front().rows(), w = images.front().cols();
  Tensor<Scalar> t(static_cast<Index>(images.size()), 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].rows() != h || images[i].cols() != w) {
      throw InputError("to_batch: images differ in shape");
    }
    t.plane(static_cast<Index>(i), 0) = images[i].template cast<Scalar>();
  }
  return t;
}

template <typename Scalar>
Image from_batch(const Tensor<Scalar>& t, Index n) {
  return t.plane(n, 0).template cast<float>();
}

/// Atomically replaces `path` with `bytes` (write to a temp file, then rename).
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace streakfix
