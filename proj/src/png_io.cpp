#include "neuroscan/png_io.hpp"

#include <png.h>

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "neuroscan/error.hpp"

namespace neuroscan::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err != nullptr) *err = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// Writes a fully prepared big-endian row buffer.
void write_png(const std::filesystem::path& path, int height, int width, int bit_depth,
               int color_type, const std::vector<std::uint8_t>& bytes, std::size_t row_bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open '" + path.string() + "' for writing");

  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to write '" + path.string() + "': " + err);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * row_bytes);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RawImage read_gray(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ValidationError("cannot open image '" + path.string() + "'");

  png_byte sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ValidationError("'" + path.string() + "' is not a PNG file");
  }

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialization failed");
  }

  RawImage out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("malformed PNG '" + path.string() + "': " + err);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if ((color & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS) != 0) {
    png_set_strip_alpha(png);
  }
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  if (depth == 16) png_set_swap(png);  // host little-endian rows
  png_read_update_info(png, info);

  const int height = static_cast<int>(png_get_image_height(png, info));
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);

  buffer.resize(row_bytes * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (height <= 0 || width <= 0) throw ValidationError("empty PNG '" + path.string() + "'");
  out = RawImage(height, width, out_depth == 16 ? 16 : 8);
  for (int y = 0; y < height; ++y) {
    const png_byte* row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      if (out_depth == 16) {
        std::uint16_t v = 0;
        std::memcpy(&v, row + static_cast<std::size_t>(x) * channels * 2, 2);
        out.at(y, x) = v;
      } else {
        out.at(y, x) = row[static_cast<std::size_t>(x) * channels];
      }
    }
  }
  return out;
}

SegmentationMask read_mask(const std::filesystem::path& path) {
  const RawImage raw = read_gray(path);
  SegmentationMask mask(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) mask.pixels[i] = raw.pixels[i] != 0 ? 1 : 0;
  return mask;
}

void write_gray(const std::filesystem::path& path, const RawImage& img) {
  if (img.empty()) throw ValidationError("refusing to write empty image '" + path.string() + "'");
  if (img.bit_depth == 16) {
    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 2;
    std::vector<std::uint8_t> bytes(row_bytes * img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      bytes[2 * i] = static_cast<std::uint8_t>(img.pixels[i] >> 8);  // PNG is big-endian
      bytes[2 * i + 1] = static_cast<std::uint8_t>(img.pixels[i] & 0xFF);
    }
    write_png(path, img.height, img.width, 16, PNG_COLOR_TYPE_GRAY, bytes, row_bytes);
    return;
  }
  std::vector<std::uint8_t> bytes(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::min<std::uint16_t>(img.pixels[i], 255));
  }
  write_png(path, img.height, img.width, 8, PNG_COLOR_TYPE_GRAY, bytes, static_cast<std::size_t>(img.width));
}

void write_mask(const std::filesystem::path& path, const SegmentationMask& mask) {
  if (mask.pixels.empty()) throw ValidationError("refusing to write empty mask '" + path.string() + "'");
  std::vector<std::uint8_t> bytes(mask.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.pixels[i] != 0 ? 255 : 0;
  write_png(path, mask.height, mask.width, 8, PNG_COLOR_TYPE_GRAY, bytes, static_cast<std::size_t>(mask.width));
}

void write_rgb(const std::filesystem::path& path, const RgbImage& img) {
  if (img.pixels.empty()) throw ValidationError("refusing to write empty image '" + path.string() + "'");
  write_png(path, img.height, img.width, 8, PNG_COLOR_TYPE_RGB, img.pixels,
            static_cast<std::size_t>(img.width) * 3);
}

RawImage to_raw8(const ImageTensor& img) {
  RawImage out(img.height, img.width, 8);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.0F, 1.0F);
    out.pixels[i] = static_cast<std::uint16_t>(std::lround(v * 255.0F));
  }
  return out;
}

}  // namespace neuroscan::png
