#pragma once

#include <vector>

#include "neuroscan/image.hpp"
#include "neuroscan/nn/tensor.hpp"

namespace neuroscan::nn {

/// Packs same-sized images into an (N, 1, H, W) tensor. Throws ShapeError on
/// mixed sizes.
Tensor to_batch(const std::vector<const ImageTensor*>& images);
Tensor to_batch(const ImageTensor& image);

/// Packs masks into an (N, 1, H, W) tensor of 0/1 values.
Tensor masks_to_batch(const std::vector<const SegmentationMask*>& masks);

}  // namespace neuroscan::nn
