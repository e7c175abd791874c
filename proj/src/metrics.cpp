#include "neuroscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "neuroscan/error.hpp"

namespace neuroscan::metrics {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void require_congruent(const SegmentationMask& a, const SegmentationMask& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": mask shapes differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                     ")");
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

bool inside_clamp(double p) { return p > kProbEps && p < 1.0 - kProbEps; }

Ratio ratio(double num, double den) {
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

}  // namespace

LossResult categorical_cross_entropy(std::span<const double> probs, std::span<const double> onehot,
                                     int num_classes) {
  require_same_size(probs.size(), onehot.size(), "categorical_cross_entropy");
  if (num_classes < 1 || probs.empty() || probs.size() % static_cast<std::size_t>(num_classes) != 0) {
    throw ShapeError("categorical_cross_entropy: predictions are not a whole number of rows");
  }
  const std::size_t n = probs.size() / static_cast<std::size_t>(num_classes);
  LossResult r;
  r.grad.assign(probs.size(), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (onehot[i] == 0.0) continue;
    r.value -= onehot[i] * std::log(clamp_prob(probs[i]));
    if (inside_clamp(probs[i])) r.grad[i] = -onehot[i] / (probs[i] * static_cast<double>(n));
  }
  r.value /= static_cast<double>(n);
  return r;
}

LossResult binary_cross_entropy(std::span<const double> pred, std::span<const double> truth) {
  require_same_size(pred.size(), truth.size(), "binary_cross_entropy");
  if (pred.empty()) throw ShapeError("binary_cross_entropy: empty input");
  const auto m = static_cast<double>(pred.size());
  LossResult r;
  r.grad.assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred[i]);
    const double y = truth[i];
    r.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (inside_clamp(pred[i])) r.grad[i] = (p - y) / (p * (1.0 - p) * m);
  }
  r.value /= m;
  return r;
}

LossResult dice_loss(std::span<const double> pred, std::span<const double> truth, double smooth) {
  require_same_size(pred.size(), truth.size(), "dice_loss");
  double inter = 0.0, sum_p = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * truth[i];
    sum_p += pred[i];
    sum_y += truth[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = sum_p + sum_y + smooth;
  LossResult r;
  r.grad.assign(pred.size(), 0.0);
  if (den == 0.0) {
    r.value = 0.0;  // empty against empty with no smoothing: perfect overlap
    return r;
  }
  r.value = 1.0 - num / den;
  const double den2 = den * den;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.grad[i] = -(2.0 * truth[i] * den - num) / den2;
  }
  return r;
}

LossResult combined_seg_loss(std::span<const double> pred, std::span<const double> truth, double w_bce,
                             double w_dice) {
  if (!(w_bce >= 0.0) || !(w_dice >= 0.0)) throw ValidationError("loss weights must be non-negative");
  if (w_bce == 0.0 && w_dice == 0.0) throw ValidationError("w_bce and w_dice cannot both be zero");
  LossResult out;
  out.grad.assign(pred.size(), 0.0);
  if (w_bce > 0.0) {
    const LossResult b = binary_cross_entropy(pred, truth);
    out.value += w_bce * b.value;
    for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] += w_bce * b.grad[i];
  }
  if (w_dice > 0.0) {
    const LossResult d = dice_loss(pred, truth);
    out.value += w_dice * d.value;
    for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] += w_dice * d.grad[i];
  }
  return out;
}

double dice_coefficient(std::span<const double> pred, std::span<const double> truth, double smooth) {
  require_same_size(pred.size(), truth.size(), "dice_coefficient");
  if (smooth < 0.0) throw ValidationError("dice smoothing must be non-negative");
  double inter = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * truth[i];
    sum += pred[i] + truth[i];
  }
  if (sum + smooth == 0.0) return 1.0;
  return (2.0 * inter + smooth) / (sum + smooth);
}

namespace {

struct Overlap {
  std::int64_t inter = 0, a = 0, b = 0;
};

Overlap overlap(const SegmentationMask& p, const SegmentationMask& t) {
  Overlap o;
  for (std::size_t i = 0; i < p.pixels.size(); ++i) {
    const bool x = p.pixels[i] != 0, y = t.pixels[i] != 0;
    o.inter += (x && y) ? 1 : 0;
    o.a += x ? 1 : 0;
    o.b += y ? 1 : 0;
  }
  return o;
}

}  // namespace

double dice(const SegmentationMask& pred, const SegmentationMask& truth) {
  require_congruent(pred, truth, "dice");
  const Overlap o = overlap(pred, truth);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.a + o.b);
}

double iou(const SegmentationMask& pred, const SegmentationMask& truth) {
  require_congruent(pred, truth, "iou");
  const Overlap o = overlap(pred, truth);
  const std::int64_t uni = o.a + o.b - o.inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.inter) / static_cast<double>(uni);
}

namespace {

// Felzenszwalb & Huttenlocher lower envelope of parabolas, in place on f.
void edt_1d(std::vector<double>& f, std::vector<int>& v, std::vector<double>& z, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<std::size_t>(q)] == inf) continue;
    const double fq = f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q;
    double s = -inf;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      s = (fq - (f[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = k == 0 ? -inf : s;
    z[static_cast<std::size_t>(k) + 1] = inf;
  }
  if (k < 0) return;  // all infinite: unchanged
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[static_cast<std::size_t>(q)] = static_cast<double>(q - p) * (q - p) + f[static_cast<std::size_t>(p)];
  }
  std::copy(d.begin(), d.end(), f.begin());
}

}  // namespace

std::vector<double> squared_distance_transform(const SegmentationMask& mask) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int h = mask.height, w = mask.width;
  std::vector<double> dt(mask.pixels.size());
  for (std::size_t i = 0; i < dt.size(); ++i) dt[i] = mask.pixels[i] ? 0.0 : inf;

  const int longest = std::max(h, w);
  std::vector<double> line(static_cast<std::size_t>(longest)), z(static_cast<std::size_t>(longest) + 1),
      out(static_cast<std::size_t>(longest));
  std::vector<int> v(static_cast<std::size_t>(longest));
  for (int x = 0; x < w; ++x) {
    line.resize(static_cast<std::size_t>(h));
    out.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) line[static_cast<std::size_t>(y)] = dt[static_cast<std::size_t>(y) * w + x];
    edt_1d(line, v, z, out);
    for (int y = 0; y < h; ++y) dt[static_cast<std::size_t>(y) * w + x] = line[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    line.assign(dt.begin() + static_cast<std::ptrdiff_t>(y) * w, dt.begin() + static_cast<std::ptrdiff_t>(y + 1) * w);
    out.resize(static_cast<std::size_t>(w));
    edt_1d(line, v, z, out);
    std::copy(line.begin(), line.end(), dt.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return dt;
}

namespace {

// Distances from every foreground pixel of `from` to the nearest foreground
// pixel of `to`.
std::vector<double> directed_distances(const SegmentationMask& from, const std::vector<double>& dt_to) {
  std::vector<double> d;
  for (std::size_t i = 0; i < from.pixels.size(); ++i) {
    if (from.pixels[i]) d.push_back(std::sqrt(dt_to[i]));
  }
  return d;
}

double summarize(std::vector<double> d, double percentile) {
  if (percentile >= 100.0) return *std::max_element(d.begin(), d.end());
  std::sort(d.begin(), d.end());
  const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(d.size())));
  return d[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace

double hausdorff(const SegmentationMask& a, const SegmentationMask& b, double percentile) {
  require_congruent(a, b, "hausdorff");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw ValidationError("hausdorff percentile must lie in (0, 100]");
  const std::size_t na = a.foreground(), nb = b.foreground();
  if (na == 0 && nb == 0) return 0.0;
  if (na == 0 || nb == 0) return std::numeric_limits<double>::infinity();
  const double ab = summarize(directed_distances(a, squared_distance_transform(b)), percentile);
  const double ba = summarize(directed_distances(b, squared_distance_transform(a)), percentile);
  return std::max(ab, ba);
}

bool SegScores::hausdorff_defined() const { return std::isfinite(hausdorff); }

nlohmann::json SegScores::to_json() const {
  nlohmann::json j = {{"dice", dice}, {"iou", iou}};
  if (hausdorff_defined()) {
    j["hausdorff"] = hausdorff;
  } else {
    j["hausdorff"] = "undefined";
  }
  return j;
}

SegScores seg_scores(const SegmentationMask& pred, const SegmentationMask& truth) {
  return {dice(pred, truth), iou(pred, truth), hausdorff(pred, truth)};
}

// --- classification ---------------------------------------------------------

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) {
    for (std::int64_t c : row) t += c;
  }
  return t;
}

std::int64_t ConfusionMatrix::support(Label truth) const {
  std::int64_t t = 0;
  for (std::int64_t c : counts[index_of(truth)]) t += c;
  return t;
}

std::int64_t ConfusionMatrix::predicted(Label pred) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[index_of(pred)];
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) t += counts[i][i];
  return t;
}

ClassificationReport confusion_and_report(const std::vector<Label>& preds, const std::vector<Label>& truths) {
  if (preds.empty()) throw ValidationError("confusion_and_report: no samples");
  if (preds.size() != truths.size()) throw ValidationError("confusion_and_report: preds and truths differ in length");
  ClassificationReport r;
  for (std::size_t i = 0; i < preds.size(); ++i) r.confusion.add(truths[i], preds[i]);
  const ConfusionMatrix& cm = r.confusion;
  double f1_sum = 0.0;
  for (Label c : kClassOrder) {
    const auto i = index_of(c);
    const auto tp = static_cast<double>(cm.counts[i][i]);
    ClassMetrics& m = r.per_class[i];
    m.support = cm.support(c);
    m.precision = ratio(tp, static_cast<double>(cm.predicted(c)));
    m.recall = ratio(tp, static_cast<double>(m.support));
    m.f1 = ratio(2.0 * tp, static_cast<double>(cm.predicted(c) + m.support));
    f1_sum += m.f1.value;
  }
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  r.macro_f1 = f1_sum / static_cast<double>(kNumClasses);
  return r;
}

ClassificationReport confusion_and_report(const std::vector<int>& preds, const std::vector<int>& truths) {
  auto convert = [](const std::vector<int>& v) {
    std::vector<Label> out;
    out.reserve(v.size());
    for (int x : v) {
      if (x < 0 || x >= static_cast<int>(kNumClasses)) {
        throw ValidationError("unknown class index " + std::to_string(x));
      }
      out.push_back(static_cast<Label>(x));
    }
    return out;
  };
  return confusion_and_report(convert(preds), convert(truths));
}

SensitivitySpecificity sensitivity_specificity(const ConfusionMatrix& cm, Label positive) {
  const auto p = index_of(positive);
  const auto tp = static_cast<double>(cm.counts[p][p]);
  const auto fn = static_cast<double>(cm.support(positive)) - tp;
  const auto fp = static_cast<double>(cm.predicted(positive)) - tp;
  const auto tn = static_cast<double>(cm.total()) - tp - fn - fp;
  return {ratio(tp, tp + fn), ratio(tn, tn + fp)};
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : cm.counts) rows.push_back(row);
  nlohmann::json order = nlohmann::json::array();
  for (Label l : kClassOrder) order.push_back(to_string(l));
  return {{"class_order", order}, {"rows", "true"}, {"columns", "predicted"}, {"counts", rows}};
}

nlohmann::json to_json(const Ratio& r) {
  if (r.undefined) return {{"value", 0.0}, {"undefined", true}};
  return {{"value", r.value}, {"undefined", false}};
}

nlohmann::json ClassificationReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (Label c : kClassOrder) {
    const ClassMetrics& m = per_class[index_of(c)];
    const SensitivitySpecificity ss = sensitivity_specificity(confusion, c);
    per[std::string(neuroscan::to_string(c))] = {{"precision", metrics::to_json(m.precision)},
                                                 {"recall", metrics::to_json(m.recall)},
                                                 {"f1", metrics::to_json(m.f1)},
                                                 {"sensitivity", metrics::to_json(ss.sensitivity)},
                                                 {"specificity", metrics::to_json(ss.specificity)},
                                                 {"support", m.support}};
  }
  return {{"confusion_matrix", metrics::to_json(confusion)},
          {"per_class", per},
          {"accuracy", accuracy},
          {"macro_f1", macro_f1},
          {"total", confusion.total()}};
}

}  // namespace neuroscan::metrics
