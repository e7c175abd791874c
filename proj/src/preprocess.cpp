#include "neuroscan/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neuroscan/error.hpp"
#include "neuroscan/rng.hpp"

namespace neuroscan::preprocess {
namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename T>
ImageTensor minmax(int height, int width, const std::vector<T>& src) {
  if (src.empty() || height <= 0 || width <= 0) throw ValidationError("cannot normalize an empty image");
  const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
  const double lo = static_cast<double>(*lo_it);
  const double hi = static_cast<double>(*hi_it);
  ImageTensor out(height, width, 0.0F);
  if (hi > lo) {
    const double span = hi - lo;
    for (std::size_t i = 0; i < src.size(); ++i) {
      out.pixels[i] = static_cast<float>((static_cast<double>(src[i]) - lo) / span);
    }
  }
  out.range_min = 0.0F;
  out.range_max = 1.0F;
  return out;
}

// Maps an output pixel centre back into source coordinates for the
// transform; rotation and zoom act about the image centre.
struct InverseMap {
  double cy, cx, cos_t, sin_t, inv_zoom;
  bool h_flip, v_flip;
  int height, width;

  InverseMap(const Transform& t, int h, int w)
      : cy(h / 2.0),
        cx(w / 2.0),
        cos_t(std::cos(t.rotation_deg * kPi / 180.0)),
        sin_t(std::sin(t.rotation_deg * kPi / 180.0)),
        inv_zoom(1.0 / t.zoom),
        h_flip(t.h_flip),
        v_flip(t.v_flip),
        height(h),
        width(w) {}

  // Returns continuous source coordinates (pixel-centre convention: pixel i
  // spans [i, i+1)).
  std::pair<double, double> operator()(int y, int x) const {
    double dy = y + 0.5 - cy;
    double dx = x + 0.5 - cx;
    // inverse rotation
    const double ry = (cos_t * dy - sin_t * dx) * inv_zoom;
    const double rx = (sin_t * dy + cos_t * dx) * inv_zoom;
    double sy = ry + cy;
    double sx = rx + cx;
    if (h_flip) sx = width - sx;
    if (v_flip) sy = height - sy;
    return {sy, sx};
  }
};

bool pure_flip(const Transform& t) { return t.rotation_deg == 0.0 && t.zoom == 1.0; }

}  // namespace

ImageTensor normalize(const RawImage& img) { return minmax(img.height, img.width, img.pixels); }

ImageTensor normalize(const ImageTensor& img) { return minmax(img.height, img.width, img.pixels); }

ImageTensor resize(const ImageTensor& img, int height, int width) {
  if (height <= 0 || width <= 0) throw ValidationError("resize target must be positive");
  if (img.pixels.empty()) throw ValidationError("cannot resize an empty image");
  if (height == img.height && width == img.width) return img;

  ImageTensor out(height, width);
  out.range_min = img.range_min;
  out.range_max = img.range_max;
  const double sy = static_cast<double>(img.height) / height;
  const double sx = static_cast<double>(img.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const float wx = static_cast<float>(fx - x0);
      // lerp form keeps constant regions exactly constant
      const float a = img.at(y0, x0) + wx * (img.at(y0, x1) - img.at(y0, x0));
      const float b = img.at(y1, x0) + wx * (img.at(y1, x1) - img.at(y1, x0));
      out.at(y, x) = a + wy * (b - a);
    }
  }
  return out;
}

SegmentationMask resize(const SegmentationMask& mask, int height, int width) {
  if (height <= 0 || width <= 0) throw ValidationError("resize target must be positive");
  if (mask.pixels.empty()) throw ValidationError("cannot resize an empty mask");
  SegmentationMask out(height, width);
  out.threshold_used = mask.threshold_used;
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / width));
      out.at(y, x) = mask.at(sy, sx) != 0 ? 1 : 0;
    }
  }
  return out;
}

AugmentationPolicy AugmentationPolicy::identity() {
  AugmentationPolicy p;
  p.max_rotation_deg = 0.0;
  p.h_flip = false;
  p.v_flip = false;
  p.zoom_low = 1.0;
  p.zoom_high = 1.0;
  return p;
}

void AugmentationPolicy::validate() const {
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 180.0)) {
    throw ValidationError("max_rotation_deg must lie in [0, 180]");
  }
  if (!(zoom_low > 0.0 && zoom_low <= 1.0 && zoom_high >= 1.0 && zoom_low <= zoom_high)) {
    throw ValidationError("zoom_range must satisfy 0 < low <= 1 <= high");
  }
}

nlohmann::json to_json(const AugmentationPolicy& p) {
  return {{"max_rotation_deg", p.max_rotation_deg},
          {"h_flip", p.h_flip},
          {"v_flip", p.v_flip},
          {"zoom_range", {p.zoom_low, p.zoom_high}},
          {"seed", p.seed}};
}

AugmentationPolicy policy_from_json(const nlohmann::json& j) {
  AugmentationPolicy p;
  try {
    p.max_rotation_deg = j.value("max_rotation_deg", p.max_rotation_deg);
    p.h_flip = j.value("h_flip", p.h_flip);
    p.v_flip = j.value("v_flip", p.v_flip);
    if (j.contains("zoom_range")) {
      const auto& z = j.at("zoom_range");
      if (!z.is_array() || z.size() != 2) throw ValidationError("zoom_range must be [low, high]");
      p.zoom_low = z[0].get<double>();
      p.zoom_high = z[1].get<double>();
    }
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed augmentation policy: ") + e.what());
  }
  p.validate();
  return p;
}

Transform sample_transform(const AugmentationPolicy& policy, std::uint64_t draw_seed) {
  policy.validate();
  Rng rng(derive_seed({policy.seed, draw_seed, 0xa06ULL}));
  // Every draw is consumed regardless of which augmentations are enabled so
  // that toggling one option does not reshuffle the others.
  const double u_rot = rng.uniform();
  const double u_zoom = rng.uniform();
  const bool flip_h = rng.bernoulli(0.5);
  const bool flip_v = rng.bernoulli(0.5);

  Transform t;
  if (policy.max_rotation_deg > 0.0) t.rotation_deg = (2.0 * u_rot - 1.0) * policy.max_rotation_deg;
  if (policy.zoom_high > policy.zoom_low) t.zoom = policy.zoom_low + (policy.zoom_high - policy.zoom_low) * u_zoom;
  t.h_flip = policy.h_flip && flip_h;
  t.v_flip = policy.v_flip && flip_v;
  return t;
}

ImageTensor apply_transform(const ImageTensor& img, const Transform& t) {
  if (t.is_identity()) return img;
  ImageTensor out(img.height, img.width, 0.0F);
  out.range_min = img.range_min;
  out.range_max = img.range_max;
  if (pure_flip(t)) {
    for (int y = 0; y < img.height; ++y) {
      const int sy = t.v_flip ? img.height - 1 - y : y;
      for (int x = 0; x < img.width; ++x) {
        out.at(y, x) = img.at(sy, t.h_flip ? img.width - 1 - x : x);
      }
    }
    return out;
  }
  const InverseMap map(t, img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto [sy, sx] = map(y, x);
      // bilinear on pixel centres; taps outside the image read as 0
      const double fy = sy - 0.5;
      const double fx = sx - 0.5;
      const int y0 = static_cast<int>(std::floor(fy));
      const int x0 = static_cast<int>(std::floor(fx));
      const double wy = fy - y0;
      const double wx = fx - x0;
      auto tap = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return 0.0;
        return img.at(yy, xx);
      };
      const double v = (1 - wy) * ((1 - wx) * tap(y0, x0) + wx * tap(y0, x0 + 1)) +
                       wy * ((1 - wx) * tap(y0 + 1, x0) + wx * tap(y0 + 1, x0 + 1));
      out.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

SegmentationMask apply_transform(const SegmentationMask& mask, const Transform& t) {
  if (t.is_identity()) return mask;
  SegmentationMask out(mask.height, mask.width);
  out.threshold_used = mask.threshold_used;
  const InverseMap map(t, mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const auto [sy, sx] = map(y, x);
      const int iy = static_cast<int>(std::floor(sy));
      const int ix = static_cast<int>(std::floor(sx));
      double v = 0.0;
      if (iy >= 0 && iy < mask.height && ix >= 0 && ix < mask.width) v = mask.at(iy, ix);
      out.at(y, x) = v >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

std::pair<ImageTensor, std::optional<SegmentationMask>> augment(const ImageTensor& img,
                                                                const std::optional<SegmentationMask>& mask,
                                                                const AugmentationPolicy& policy,
                                                                std::uint64_t draw_seed) {
  if (mask && (mask->height != img.height || mask->width != img.width)) {
    throw ShapeError("mask " + std::to_string(mask->height) + "x" + std::to_string(mask->width) +
                     " is not congruent with image " + std::to_string(img.height) + "x" +
                     std::to_string(img.width));
  }
  const Transform t = sample_transform(policy, draw_seed);
  std::optional<SegmentationMask> out_mask;
  if (mask) out_mask = apply_transform(*mask, t);
  return {apply_transform(img, t), std::move(out_mask)};
}

}  // namespace neuroscan::preprocess
