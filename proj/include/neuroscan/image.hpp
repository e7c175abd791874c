#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace neuroscan {

/// Integer-valued grayscale image as read from disk (8- or 16-bit).
struct RawImage {
  int height = 0;
  int width = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> pixels;  // row-major

  RawImage() = default;
  RawImage(int h, int w, int depth = 8)
      : height(h), width(w), bit_depth(depth), pixels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint16_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return pixels.empty(); }
};

/// Real-valued single-channel image. After normalization values lie in [0, 1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // row-major
  float range_min = 0.0F;
  float range_max = 1.0F;

  ImageTensor() = default;
  ImageTensor(int h, int w, float fill = 0.0F)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const ImageTensor& o) const { return height == o.height && width == o.width; }
};

/// Binary 2-D mask; every value is 0 or 1.
struct SegmentationMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, values in {0,1}
  double threshold_used = 0.5;

  SegmentationMask() = default;
  SegmentationMask(int h, int w)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }
  std::size_t foreground() const;
  bool same_shape(const SegmentationMask& o) const { return height == o.height && width == o.width; }
  bool operator==(const SegmentationMask& o) const {
    return height == o.height && width == o.width && pixels == o.pixels;
  }
};

/// 8-bit RGB raster used for overlay rendering.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

  void set(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  bool operator==(const RgbImage& o) const = default;
};

}  // namespace neuroscan
