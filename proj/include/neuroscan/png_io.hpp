#pragma once

#include <filesystem>

#include "neuroscan/image.hpp"

namespace neuroscan::png {

/// Reads a PNG as grayscale. Color inputs are converted to luminance; palette
/// and sub-byte depths are expanded to 8 bits. Throws ValidationError on
/// unreadable or malformed files.
RawImage read_gray(const std::filesystem::path& path);

/// Reads a mask PNG: any nonzero pixel is foreground.
SegmentationMask read_mask(const std::filesystem::path& path);

/// Writes an 8- or 16-bit grayscale PNG (chosen from img.bit_depth).
void write_gray(const std::filesystem::path& path, const RawImage& img);
void write_mask(const std::filesystem::path& path, const SegmentationMask& mask);
void write_rgb(const std::filesystem::path& path, const RgbImage& img);

/// Quantizes a [0,1] image to 8 bits (round to nearest).
RawImage to_raw8(const ImageTensor& img);

}  // namespace neuroscan::png
