#include "neuroscan/nn/batch.hpp"

#include <algorithm>

#include "neuroscan/error.hpp"

namespace neuroscan::nn {

Tensor to_batch(const std::vector<const ImageTensor*>& images) {
  if (images.empty()) throw ValidationError("cannot batch zero images");
  const int h = images.front()->height;
  const int w = images.front()->width;
  Tensor t({static_cast<int>(images.size()), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w) throw ShapeError("images in a batch must share one size");
    std::copy(images[i]->pixels.begin(), images[i]->pixels.end(), t.sample(static_cast<int>(i)).begin());
  }
  return t;
}

Tensor to_batch(const ImageTensor& image) { return to_batch(std::vector<const ImageTensor*>{&image}); }

Tensor masks_to_batch(const std::vector<const SegmentationMask*>& masks) {
  if (masks.empty()) throw ValidationError("cannot batch zero masks");
  const int h = masks.front()->height;
  const int w = masks.front()->width;
  Tensor t({static_cast<int>(masks.size()), 1, h, w});
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i]->height != h || masks[i]->width != w) throw ShapeError("masks in a batch must share one size");
    auto dst = t.sample(static_cast<int>(i));
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = masks[i]->pixels[p] != 0 ? 1.0F : 0.0F;
  }
  return t;
}

}  // namespace neuroscan::nn
