#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "neuroscan/error.hpp"
#include "neuroscan/image.hpp"
#include "neuroscan/labels.hpp"
#include "neuroscan/rng.hpp"

namespace neuroscan {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::meningioma: return "meningioma";
    case Label::glioma: return "glioma";
    case Label::pituitary: return "pituitary";
    case Label::no_tumor: return "no_tumor";
  }
  return "unknown";
}

std::optional<Label> parse_label(std::string_view name) {
  for (Label l : kClassOrder) {
    if (to_string(l) == name) return l;
  }
  return std::nullopt;
}

Label label_from_string(std::string_view name) {
  if (auto l = parse_label(name)) return *l;
  throw ValidationError("unknown label '" + std::string(name) +
                        "' (expected meningioma, glioma, pituitary or no_tumor)");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t SegmentationMask::foreground() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

}  // namespace neuroscan
