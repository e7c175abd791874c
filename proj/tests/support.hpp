#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "neuroscan/image.hpp"
#include "neuroscan/nn/tensor.hpp"
#include "neuroscan/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("neuroscan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline neuroscan::SegmentationMask random_mask(neuroscan::Rng& rng, int h, int w, double p) {
  neuroscan::SegmentationMask m(h, w);
  for (auto& v : m.pixels) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

inline neuroscan::SegmentationMask mask_from_bits(unsigned bits, int h, int w) {
  neuroscan::SegmentationMask m(h, w);
  for (int i = 0; i < h * w; ++i) m.pixels[static_cast<std::size_t>(i)] = (bits >> i) & 1U;
  return m;
}

inline neuroscan::nn::Tensor random_tensor(neuroscan::Rng& rng, neuroscan::nn::Shape s, double scale = 1.0) {
  neuroscan::nn::Tensor t(s);
  for (auto& v : t.data) v = static_cast<float>(rng.normal() * scale);
  return t;
}

// Independent set-based oracles.
inline double oracle_dice(const neuroscan::SegmentationMask& a, const neuroscan::SegmentationMask& b) {
  long inter = 0, na = 0, nb = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      na += a.at(y, x);
      nb += b.at(y, x);
      inter += a.at(y, x) && b.at(y, x);
    }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

inline double oracle_iou(const neuroscan::SegmentationMask& a, const neuroscan::SegmentationMask& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    inter += a.pixels[i] && b.pixels[i];
    uni += a.pixels[i] || b.pixels[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Brute-force symmetric Hausdorff: double loop over foreground pixels.
inline double oracle_hausdorff(const neuroscan::SegmentationMask& a, const neuroscan::SegmentationMask& b) {
  std::vector<std::pair<int, int>> pa, pb;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (a.at(y, x)) pa.emplace_back(y, x);
      if (b.at(y, x)) pb.emplace_back(y, x);
    }
  if (pa.empty() && pb.empty()) return 0.0;
  if (pa.empty() || pb.empty()) return std::numeric_limits<double>::infinity();
  auto directed = [](const auto& from, const auto& to) {
    double worst = 0.0;
    for (auto [y1, x1] : from) {
      double best = std::numeric_limits<double>::infinity();
      for (auto [y2, x2] : to) best = std::min(best, std::hypot(double(y1 - y2), double(x1 - x2)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

}  // namespace testing
