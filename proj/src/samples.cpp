#include "neuroscan/samples.hpp"

#include "neuroscan/error.hpp"
#include "neuroscan/png_io.hpp"
#include "neuroscan/preprocess.hpp"

namespace neuroscan::dataset {

Sample load_sample(const CaseRecord& rec, int height, int width, bool want_mask) {
  Sample s;
  s.case_id = rec.case_id;
  s.label = rec.label;
  const RawImage raw = png::read_gray(rec.image_ref);
  s.original_height = raw.height;
  s.original_width = raw.width;
  s.image = preprocess::resize(preprocess::normalize(raw), height, width);
  if (rec.mask_ref) {
    const SegmentationMask m = png::read_mask(*rec.mask_ref);
    if (m.height != raw.height || m.width != raw.width) {
      throw ShapeError("mask of case '" + rec.case_id + "' does not match its image size");
    }
    s.mask = preprocess::resize(m, height, width);
  } else if (want_mask) {
    if (is_tumor(rec.label)) {
      throw ValidationError("case '" + rec.case_id + "' is labeled " + std::string(to_string(rec.label)) +
                            " but has no mask");
    }
    s.mask = SegmentationMask(height, width);
  }
  return s;
}

std::vector<Sample> load_samples(const std::vector<const CaseRecord*>& records, int height, int width,
                                 bool want_mask) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const CaseRecord* r : records) out.push_back(load_sample(*r, height, width, want_mask));
  return out;
}

}  // namespace neuroscan::dataset
