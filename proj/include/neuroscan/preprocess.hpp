#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include <json.hpp>

#include "neuroscan/image.hpp"

namespace neuroscan::preprocess {

/// Per-image min-max scaling to [0, 1]. A constant image maps to all zeros.
ImageTensor normalize(const RawImage& img);
/// Same rule applied to an already real-valued image.
ImageTensor normalize(const ImageTensor& img);

/// Bilinear resampling with half-pixel centres; values stay inside the input range.
ImageTensor resize(const ImageTensor& img, int height, int width);
/// Nearest-neighbour resampling; output stays binary.
SegmentationMask resize(const SegmentationMask& mask, int height, int width);

struct AugmentationPolicy {
  double max_rotation_deg = 15.0;
  bool h_flip = true;
  bool v_flip = true;
  double zoom_low = 0.9;
  double zoom_high = 1.1;
  std::uint64_t seed = 0;

  /// Everything disabled; augment() becomes the identity.
  static AugmentationPolicy identity();
  /// Throws ValidationError.
  void validate() const;
  bool operator==(const AugmentationPolicy&) const = default;
};

nlohmann::json to_json(const AugmentationPolicy& p);
AugmentationPolicy policy_from_json(const nlohmann::json& j);

/// Concrete geometric transform drawn from a policy.
struct Transform {
  double rotation_deg = 0.0;
  double zoom = 1.0;
  bool h_flip = false;
  bool v_flip = false;

  bool is_identity() const { return rotation_deg == 0.0 && zoom == 1.0 && !h_flip && !v_flip; }
};

/// Transform parameters are a pure function of (policy.seed, draw_seed).
Transform sample_transform(const AugmentationPolicy& policy, std::uint64_t draw_seed);

/// Applies the transform about the image centre. Pixels mapped from outside
/// the source are filled with 0. Images use bilinear sampling, masks nearest
/// neighbour followed by re-binarization at 0.5.
ImageTensor apply_transform(const ImageTensor& img, const Transform& t);
SegmentationMask apply_transform(const SegmentationMask& mask, const Transform& t);

/// Draws one transform and applies it jointly to the image and (optional)
/// mask. Throws ShapeError when the mask is not congruent with the image.
std::pair<ImageTensor, std::optional<SegmentationMask>> augment(const ImageTensor& img,
                                                                const std::optional<SegmentationMask>& mask,
                                                                const AugmentationPolicy& policy,
                                                                std::uint64_t draw_seed);

}  // namespace neuroscan::preprocess
