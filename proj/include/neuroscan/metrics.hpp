#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "neuroscan/image.hpp"
#include "neuroscan/labels.hpp"

namespace neuroscan::metrics {

/// Probability clamp used by the cross-entropy losses.
inline constexpr double kProbEps = 1e-7;
/// Smoothing term of the Dice loss.
inline constexpr double kDiceLossSmooth = 1e-6;

/// Loss value plus its gradient with respect to each prediction entry.
struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

/// Mean over rows of -log p(true class), with p clamped to [eps, 1-eps].
/// `probs` and `onehot` are row-major (N, num_classes).
LossResult categorical_cross_entropy(std::span<const double> probs, std::span<const double> onehot,
                                     int num_classes);

/// Mean elementwise binary cross-entropy with the same clamp.
LossResult binary_cross_entropy(std::span<const double> pred, std::span<const double> truth);

/// 1 - (2*sum(p*y) + smooth) / (sum(p) + sum(y) + smooth), summed over every
/// element passed in (a whole batch counts as one volume).
LossResult dice_loss(std::span<const double> pred, std::span<const double> truth,
                     double smooth = kDiceLossSmooth);

/// w_bce * BCE + w_dice * dice_loss. Throws ValidationError for negative
/// weights or when both are zero.
LossResult combined_seg_loss(std::span<const double> pred, std::span<const double> truth, double w_bce = 1.0,
                             double w_dice = 1.0);

/// (2*sum(p*y) + smooth) / (sum(p) + sum(y) + smooth). With smooth = 0 an
/// empty prediction against an empty truth scores 1.
double dice_coefficient(std::span<const double> pred, std::span<const double> truth, double smooth = 0.0);

double dice(const SegmentationMask& pred, const SegmentationMask& truth);
/// |A n B| / |A u B|, 1 when both are empty.
double iou(const SegmentationMask& pred, const SegmentationMask& truth);

/// Symmetric Hausdorff distance in pixels between the foreground sets.
/// 0 when both are empty, +infinity when exactly one is empty.
/// percentile < 100 takes that percentile of each directed distance set
/// (nearest rank) instead of the maximum.
double hausdorff(const SegmentationMask& a, const SegmentationMask& b, double percentile = 100.0);

/// Squared Euclidean distance from every pixel to the nearest foreground
/// pixel of `mask` (+infinity everywhere for an empty mask).
std::vector<double> squared_distance_transform(const SegmentationMask& mask);

struct SegScores {
  double dice = 0.0;
  double iou = 0.0;
  double hausdorff = 0.0;  // may be +infinity

  bool hausdorff_defined() const;
  nlohmann::json to_json() const;
};

SegScores seg_scores(const SegmentationMask& pred, const SegmentationMask& truth);

struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};  // [true][predicted]

  void add(Label truth, Label pred) { ++counts[index_of(truth)][index_of(pred)]; }
  std::int64_t total() const;
  std::int64_t support(Label truth) const;
  std::int64_t predicted(Label pred) const;
  std::int64_t trace() const;
};

/// A ratio whose denominator may be zero; then value is 0 and undefined is set.
struct Ratio {
  double value = 0.0;
  bool undefined = false;
};

struct ClassMetrics {
  Ratio precision;
  Ratio recall;
  Ratio f1;
  std::int64_t support = 0;
};

struct ClassificationReport {
  ConfusionMatrix confusion;
  std::array<ClassMetrics, kNumClasses> per_class{};
  double accuracy = 0.0;
  double macro_f1 = 0.0;

  nlohmann::json to_json() const;
};

/// Throws ValidationError for empty or unequal-length inputs.
ClassificationReport confusion_and_report(const std::vector<Label>& preds, const std::vector<Label>& truths);
/// Integer class indices in class order; out-of-range values throw ValidationError.
ClassificationReport confusion_and_report(const std::vector<int>& preds, const std::vector<int>& truths);

struct SensitivitySpecificity {
  Ratio sensitivity;
  Ratio specificity;
};

/// One-vs-rest rates for `positive`.
SensitivitySpecificity sensitivity_specificity(const ConfusionMatrix& cm, Label positive);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const Ratio& r);

}  // namespace neuroscan::metrics
