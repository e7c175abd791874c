#include "neuroscan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neuroscan/error.hpp"
#include "neuroscan/png_io.hpp"
#include "neuroscan/preprocess.hpp"

namespace neuroscan::pipeline {

namespace {

ImageTensor at_resolution(const ImageTensor& img, int h, int w) {
  if (img.height == h && img.width == w) return img;
  return preprocess::resize(img, h, w);
}

std::string fmt(double v) {
  if (std::isinf(v)) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

nlohmann::json CaseResult::to_json() const {
  nlohmann::json probs = nlohmann::json::object();
  nlohmann::json order = nlohmann::json::array();
  for (Label l : kClassOrder) {
    probs[std::string(neuroscan::to_string(l))] = class_probs.of(l);
    order.push_back(neuroscan::to_string(l));
  }
  nlohmann::json j = {{"case_id", case_id},
                      {"class_order", order},
                      {"class_probs", probs},
                      {"predicted_label", std::string(neuroscan::to_string(predicted_label))},
                      {"has_mask", mask.has_value()}};
  if (true_label) j["true_label"] = std::string(neuroscan::to_string(*true_label));
  if (mask) {
    j["mask_foreground"] = mask->foreground();
    j["threshold"] = mask->threshold_used;
  }
  if (mask_ref) j["mask_path"] = mask_ref->generic_string();
  if (seg_scores) j["seg_scores"] = seg_scores->to_json();
  if (overlay_ref) j["overlay_path"] = overlay_ref->generic_string();
  return j;
}

void check_resolution(const nn::Model& model, int height, int width, const std::string& what) {
  if (model.input_height() != height || model.input_width() != width) {
    throw ValidationError(what + " expects " + std::to_string(model.input_height()) + "x" +
                          std::to_string(model.input_width()) + " input but the configuration requests " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
}

CaseResult run_case(classifier::ClassifierModel& cls, segmenter::SegmenterModel& seg, const ImageTensor& img,
                    bool gate, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  CaseResult r;
  r.class_probs = classifier::predict_class(cls, at_resolution(img, cls.input_height(), cls.input_width()));
  r.predicted_label = r.class_probs.argmax();
  if (!gate || is_tumor(r.predicted_label)) {
    SegmentationMask m =
        segmenter::predict_mask(seg, at_resolution(img, seg.input_height(), seg.input_width()), threshold);
    if (m.height != img.height || m.width != img.width) m = preprocess::resize(m, img.height, img.width);
    m.threshold_used = threshold;
    r.mask = std::move(m);
  }
  return r;
}

SegmentationMask contour(const SegmentationMask& mask) {
  SegmentationMask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == mask.height - 1 || x == mask.width - 1 || !mask.at(y - 1, x) ||
                        !mask.at(y + 1, x) || !mask.at(y, x - 1) || !mask.at(y, x + 1);
      out.at(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

RgbImage render_overlay(const ImageTensor& img, const SegmentationMask& mask,
                        const std::optional<SegmentationMask>& truth) {
  if (img.height != mask.height || img.width != mask.width) {
    throw ShapeError("overlay: mask is not congruent with the image");
  }
  if (truth && !truth->same_shape(mask)) throw ShapeError("overlay: truth mask is not congruent with the image");
  RgbImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.at(y, x), 0.0F, 1.0F);
      const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0F));
      out.set(y, x, g, g, g);
    }
  }
  auto paint = [&out](const SegmentationMask& m, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const SegmentationMask c = contour(m);
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        if (c.at(y, x)) out.set(y, x, r, g, b);
      }
    }
  };
  if (truth) paint(*truth, 0, 255, 0);
  paint(mask, 255, 0, 0);
  return out;
}

void write_overlay(const fs::path& path, const ImageTensor& img, const SegmentationMask& mask,
                   const std::optional<SegmentationMask>& truth) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png::write_rgb(path, render_overlay(img, mask, truth));
}

nlohmann::json SegmentationSummary::to_json() const {
  nlohmann::json j = {{"present", true},
                      {"cases", cases},
                      {"mean_dice", mean_dice},
                      {"mean_iou", mean_iou},
                      {"hausdorff_undefined", hausdorff_undefined}};
  if (cases > hausdorff_undefined) {
    j["mean_hausdorff"] = mean_hausdorff;
  } else {
    j["mean_hausdorff"] = "undefined";
  }
  return j;
}

std::optional<SegmentationSummary> summarize_segmentation(const std::vector<CaseResult>& results) {
  std::vector<const CaseResult*> scored;
  for (const auto& r : results) {
    if (r.seg_scores) scored.push_back(&r);
  }
  if (scored.empty()) return std::nullopt;
  std::stable_sort(scored.begin(), scored.end(),
                   [](const CaseResult* a, const CaseResult* b) { return a->case_id < b->case_id; });
  SegmentationSummary s;
  s.cases = scored.size();
  double hd_sum = 0.0;
  for (const CaseResult* r : scored) {
    s.mean_dice += r->seg_scores->dice;
    s.mean_iou += r->seg_scores->iou;
    if (r->seg_scores->hausdorff_defined()) {
      hd_sum += r->seg_scores->hausdorff;
    } else {
      ++s.hausdorff_undefined;
    }
  }
  s.mean_dice /= static_cast<double>(s.cases);
  s.mean_iou /= static_cast<double>(s.cases);
  const std::size_t defined = s.cases - s.hausdorff_undefined;
  s.mean_hausdorff = defined ? hd_sum / static_cast<double>(defined) : 0.0;
  return s;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json cases_j = nlohmann::json::array();
  for (const auto& c : cases) cases_j.push_back(c.to_json());
  return {{"split", std::string(neuroscan::to_string(split))},
          {"total", cases.size()},
          {"gate", gate},
          {"threshold", threshold},
          {"classification", classification.to_json()},
          {"segmentation", segmentation ? segmentation->to_json() : nlohmann::json{{"present", false}}},
          {"cases", cases_j}};
}

std::string EvaluationReport::cases_csv() const {
  std::ostringstream out;
  out << "case_id,true_label,predicted_label";
  for (Label l : kClassOrder) out << ",p_" << neuroscan::to_string(l);
  out << ",dice,iou,hausdorff\n";
  for (const auto& c : cases) {
    out << c.case_id << ',' << (c.true_label ? neuroscan::to_string(*c.true_label) : "") << ','
        << neuroscan::to_string(c.predicted_label);
    for (Label l : kClassOrder) out << ',' << fmt(c.class_probs.of(l));
    if (c.seg_scores) {
      out << ',' << fmt(c.seg_scores->dice) << ',' << fmt(c.seg_scores->iou) << ',' << fmt(c.seg_scores->hausdorff);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  return out.str();
}

EvaluationReport evaluate_suite(classifier::ClassifierModel& cls, segmenter::SegmenterModel& seg,
                                const dataset::Manifest& manifest, Split split, const EvalOptions& opts) {
  auto records = manifest.in_split(split);
  if (records.empty()) {
    throw ValidationError("split '" + std::string(neuroscan::to_string(split)) + "' has no cases");
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const dataset::CaseRecord* a, const dataset::CaseRecord* b) { return a->case_id < b->case_id; });

  EvaluationReport rep;
  rep.split = split;
  rep.gate = opts.gate;
  rep.threshold = opts.threshold;
  std::vector<Label> preds, truths;
  for (const dataset::CaseRecord* rec : records) {
    const ImageTensor img = preprocess::normalize(png::read_gray(rec->image_ref));
    CaseResult r = run_case(cls, seg, img, opts.gate, opts.threshold);
    r.case_id = rec->case_id;
    r.true_label = rec->label;
    std::optional<SegmentationMask> truth;
    if (rec->mask_ref) {
      truth = png::read_mask(*rec->mask_ref);
      if (truth->height != img.height || truth->width != img.width) {
        throw ShapeError("mask of case '" + rec->case_id + "' does not match its image size");
      }
    }
    if (r.mask && truth) r.seg_scores = metrics::seg_scores(*r.mask, *truth);
    if (opts.out_dir && opts.write_overlays) {
      const fs::path rel = fs::path("overlays") / (rec->case_id + ".png");
      write_overlay(*opts.out_dir / rel, img, r.mask ? *r.mask : SegmentationMask(img.height, img.width), truth);
      r.overlay_ref = rel;
    }
    preds.push_back(r.predicted_label);
    truths.push_back(rec->label);
    rep.cases.push_back(std::move(r));
  }
  rep.classification = metrics::confusion_and_report(preds, truths);
  rep.segmentation = summarize_segmentation(rep.cases);

  if (opts.out_dir) {
    fs::create_directories(*opts.out_dir);
    write_text(*opts.out_dir / "report.json", rep.to_json().dump(2) + "\n");
    write_text(*opts.out_dir / "cases.csv", rep.cases_csv());
  }
  return rep;
}

}  // namespace neuroscan::pipeline
