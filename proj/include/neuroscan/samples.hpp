#pragma once

#include <optional>
#include <string>
#include <vector>

#include "neuroscan/dataset.hpp"
#include "neuroscan/image.hpp"

namespace neuroscan::dataset {

/// A record decoded and brought to model resolution.
struct Sample {
  std::string case_id;
  Label label = Label::no_tumor;
  ImageTensor image;                      // normalized, resized
  std::optional<SegmentationMask> mask;   // resized (nearest neighbour)
  int original_height = 0;
  int original_width = 0;
};

/// Reads, normalizes and resizes one record. A no_tumor record without a
/// mask file gets an all-zero mask when `want_mask` is set; a tumor record
/// without one throws ValidationError in that case.
Sample load_sample(const CaseRecord& rec, int height, int width, bool want_mask);

std::vector<Sample> load_samples(const std::vector<const CaseRecord*>& records, int height, int width,
                                 bool want_mask);

}  // namespace neuroscan::dataset
