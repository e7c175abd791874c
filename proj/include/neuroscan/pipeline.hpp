#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroscan/classifier.hpp"
#include "neuroscan/dataset.hpp"
#include "neuroscan/metrics.hpp"
#include "neuroscan/segmenter.hpp"

namespace neuroscan::pipeline {

namespace fs = std::filesystem;

struct CaseResult {
  std::string case_id;
  classifier::ClassProbabilities class_probs;
  Label predicted_label = Label::no_tumor;
  std::optional<Label> true_label;
  std::optional<SegmentationMask> mask;         // at the resolution of the input image
  std::optional<metrics::SegScores> seg_scores; // only with both a mask and ground truth
  std::optional<fs::path> overlay_ref;
  std::optional<fs::path> mask_ref;

  nlohmann::json to_json() const;
};

/// Throws ValidationError when a model's input resolution differs from the
/// expected one.
void check_resolution(const nn::Model& model, int height, int width, const std::string& what);

/// Classifies `img` and, unless gated out by a no_tumor prediction, segments
/// it. The image is resized to each model's input resolution internally; the
/// mask is returned at the image's own resolution.
CaseResult run_case(classifier::ClassifierModel& cls, segmenter::SegmenterModel& seg, const ImageTensor& img,
                    bool gate = true, double threshold = 0.5);

/// Grayscale base with the truth contour in green and the predicted contour
/// in red (drawn last). A contour pixel is a foreground pixel with a
/// 4-neighbour outside the mask or on the image border.
RgbImage render_overlay(const ImageTensor& img, const SegmentationMask& mask,
                        const std::optional<SegmentationMask>& truth = std::nullopt);
SegmentationMask contour(const SegmentationMask& mask);
void write_overlay(const fs::path& path, const ImageTensor& img, const SegmentationMask& mask,
                   const std::optional<SegmentationMask>& truth = std::nullopt);

struct SegmentationSummary {
  std::size_t cases = 0;  // cases with both a predicted mask and ground truth
  double mean_dice = 0.0;
  double mean_iou = 0.0;
  double mean_hausdorff = 0.0;  // over cases where it is defined
  std::size_t hausdorff_undefined = 0;

  nlohmann::json to_json() const;
};

/// Means over every result carrying seg_scores, reduced in case_id order.
std::optional<SegmentationSummary> summarize_segmentation(const std::vector<CaseResult>& results);

struct EvaluationReport {
  Split split = Split::test;
  bool gate = true;
  double threshold = 0.5;
  metrics::ClassificationReport classification;
  std::optional<SegmentationSummary> segmentation;  // absent without ground-truth masks
  std::vector<CaseResult> cases;                    // sorted by case_id

  nlohmann::json to_json() const;
  std::string cases_csv() const;
};

struct EvalOptions {
  bool gate = true;
  double threshold = 0.5;
  /// When set, report.json, cases.csv and overlays/<case_id>.png go here.
  std::optional<fs::path> out_dir;
  bool write_overlays = true;
};

/// Runs every case of `split` through run_case and scores it against the
/// manifest labels and masks at the original image resolution. Throws
/// ValidationError for an empty split.
EvaluationReport evaluate_suite(classifier::ClassifierModel& cls, segmenter::SegmenterModel& seg,
                                const dataset::Manifest& manifest, Split split, const EvalOptions& opts = {});

}  // namespace neuroscan::pipeline
