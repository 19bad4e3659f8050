#include "streakfix/image.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "streakfix/errors.hpp"

namespace streakfix {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + at, 4);
  return v;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + target.parent_path().string() + "': " + ec.message());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void write_image(const std::string& path, const Image& image) {
  std::string bytes(kImageMagic, 4);
  put_u32(bytes, kImageVersion);
  put_u32(bytes, static_cast<std::uint32_t>(image.cols()));
  put_u32(bytes, static_cast<std::uint32_t>(image.rows()));
  bytes.append(reinterpret_cast<const char*>(image.data()),
               static_cast<std::size_t>(image.size()) * sizeof(float));
  write_file_atomic(path, bytes);
}

Image read_image(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kImageMagic, 4) != 0) {
    throw IoError("'" + path + "' is not an SVCB image file");
  }
  if (get_u32(bytes, 4) != kImageVersion) {
    throw IoError("'" + path + "': unsupported image version " + std::to_string(get_u32(bytes, 4)));
  }
  const std::uint32_t width = get_u32(bytes, 8), height = get_u32(bytes, 12);
  const std::size_t expected = 16 + std::size_t(width) * height * sizeof(float);
  if (bytes.size() != expected) {
    throw IoError("'" + path + "': payload size " + std::to_string(bytes.size() - 16) +
                  " does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  Image image(height, width);
  std::memcpy(image.data(), bytes.data() + 16, expected - 16);
  return image;
}

namespace {

struct PngWriter {
  std::FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngWriter(const std::string& path) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    file = std::fopen(path.c_str(), "wb");
    if (!file) throw IoError("cannot open '" + path + "' for writing");
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!info) throw IoError("libpng initialisation failed for '" + path + "'");
    png_init_io(png, file);
  }
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
  }

  void write(int width, int height, int bit_depth, int color_type,
             std::vector<png_bytep>& rows, const std::string& path) {
    if (setjmp(png_jmpbuf(png))) throw IoError("libpng failed writing '" + path + "'");
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // host little-endian → PNG big-endian
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  }
};

}  // namespace

void write_png16(const std::string& path, const Image& image) {
  const int w = static_cast<int>(image.cols()), h = static_cast<int>(image.rows());
  std::vector<std::uint16_t> pixels(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const float v = std::clamp(image(r, c), 0.0f, 1.0f);
      pixels[static_cast<std::size_t>(r) * w + c] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
    }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r)
    rows[static_cast<std::size_t>(r)] = reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * w);
  PngWriter writer(path);
  writer.write(w, h, 16, PNG_COLOR_TYPE_GRAY, rows, path);
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw InputError("write_png_rgb: buffer size does not match dimensions");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r)
    rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(r) * width * 3);
  PngWriter writer(path);
  writer.write(width, height, 8, PNG_COLOR_TYPE_RGB, rows, path);
}

}  // namespace streakfix
