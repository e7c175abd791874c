#include <doctest.h>

#include <cmath>
#include <limits>

#include "neuroscan/error.hpp"
#include "neuroscan/metrics.hpp"
#include "support.hpp"

using namespace neuroscan;
using namespace neuroscan::metrics;

namespace {

SegmentationMask pixels(int h, int w, std::initializer_list<std::pair<int, int>> on) {
  SegmentationMask m(h, w);
  for (auto [y, x] : on) m.at(y, x) = 1;
  return m;
}

std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(0.05, 0.95);
  return v;
}

std::vector<double> random_binary(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.bernoulli(0.4) ? 1.0 : 0.0;
  return v;
}

template <typename F>
double max_rel_fd_error(F loss, std::vector<double> p, const std::vector<double>& analytic) {
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = loss(p);
    p[i] = keep - h;
    const double down = loss(p);
    p[i] = keep;
    const double num = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(num - analytic[i]) / std::max(1e-8, std::max(std::abs(num), std::abs(analytic[i]))));
  }
  return worst;
}

}  // namespace

TEST_CASE("categorical cross-entropy closed forms") {
  const std::vector<double> onehot = {0, 1, 0, 0};
  CHECK(categorical_cross_entropy(std::vector<double>{0, 1, 0, 0}, onehot, 4).value <= 1.2e-7);
  CHECK(categorical_cross_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, onehot, 4).value ==
        doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(categorical_cross_entropy(std::vector<double>{0.2, 0.5, 0.2, 0.1}, onehot, 4).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(categorical_cross_entropy(std::vector<double>{0.5, 0.5}, onehot, 4), ShapeError);
}

TEST_CASE("dice and iou on the worked example") {
  const auto a = pixels(1, 3, {{0, 0}, {0, 1}});
  const auto b = pixels(1, 3, {{0, 1}, {0, 2}});
  CHECK(dice(a, b) == 0.5);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(dice(a, a) == 1.0);
  CHECK(iou(a, a) == 1.0);
  CHECK(dice(pixels(1, 3, {{0, 0}}), pixels(1, 3, {{0, 2}})) == 0.0);
  CHECK(dice(SegmentationMask(2, 2), SegmentationMask(2, 2)) == 1.0);
  CHECK(iou(SegmentationMask(2, 2), SegmentationMask(2, 2)) == 1.0);
  CHECK_THROWS_AS(dice(SegmentationMask(2, 2), SegmentationMask(2, 3)), ShapeError);
  CHECK_THROWS_AS(iou(SegmentationMask(2, 2), SegmentationMask(3, 2)), ShapeError);
}

TEST_CASE("hausdorff: identical, single pixels, empties") {
  const auto a = pixels(8, 8, {{0, 0}});
  const auto b = pixels(8, 8, {{3, 4}});
  CHECK(hausdorff(a, b) == 5.0);
  CHECK(hausdorff(a, a) == 0.0);
  CHECK(hausdorff(SegmentationMask(8, 8), SegmentationMask(8, 8)) == 0.0);
  CHECK(std::isinf(hausdorff(a, SegmentationMask(8, 8))));
  CHECK_FALSE(seg_scores(a, SegmentationMask(8, 8)).hausdorff_defined());
  CHECK(seg_scores(a, SegmentationMask(8, 8)).to_json()["hausdorff"] == "undefined");
}

TEST_CASE("hausdorff: an added far pixel dominates the distance (subset case)") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    SegmentationMask a(16, 16);
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) a.at(y, x) = rng.bernoulli(0.7) ? 1 : 0;
    a.at(3, 3) = 1;
    SegmentationMask b = a;
    const int py = 8 + static_cast<int>(rng.below(8)), px = 8 + static_cast<int>(rng.below(8));
    b.at(py, px) = 1;
    const double d = testing::oracle_hausdorff(a, b);
    CHECK(hausdorff(a, b) == doctest::Approx(d).epsilon(1e-12));
    // Every point of A is in B, so h(A,B) = 0 and the distance is h(B,A):
    // the added pixel's distance to its nearest A pixel.
    double nearest = 1e9;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (a.at(y, x)) nearest = std::min(nearest, std::hypot(double(y - py), double(x - px)));
    CHECK(hausdorff(a, b) == doctest::Approx(nearest).epsilon(1e-12));
  }
}

TEST_CASE("hausdorff 95th percentile never exceeds the maximum") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = testing::random_mask(rng, 16, 16, 0.2);
    const auto b = testing::random_mask(rng, 16, 16, 0.2);
    if (!a.foreground() || !b.foreground()) continue;
    CHECK(hausdorff(a, b, 95.0) <= hausdorff(a, b) + 1e-12);
  }
  CHECK_THROWS_AS(hausdorff(SegmentationMask(2, 2), SegmentationMask(2, 2), 0.0), ValidationError);
}

TEST_CASE("metric symmetry, bounds and the dice-iou identity") {
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = testing::random_mask(rng, 9, 11, rng.uniform());
    const auto b = testing::random_mask(rng, 9, 11, rng.uniform());
    const double d = dice(a, b), j = iou(a, b);
    CHECK(d == dice(b, a));
    CHECK(j == iou(b, a));
    CHECK(hausdorff(a, b) == hausdorff(b, a));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(std::abs(d - 2 * j / (1 + j)) <= 1e-9);
    CHECK((hausdorff(a, b) == 0.0) == (a == b || (a.foreground() == 0 && b.foreground() == 0)));
  }
}

TEST_CASE("soft dice coefficient and dice loss") {
  const std::vector<double> y = {1, 0, 1, 1, 0, 0};
  CHECK(dice_loss(y, y).value <= 1e-6);
  CHECK(dice_loss(std::vector<double>(6, 0.0), y).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(dice_coefficient(std::vector<double>{1, 1, 0}, std::vector<double>{0, 1, 1}) == 0.5);
  CHECK(dice_coefficient(std::vector<double>{0, 0}, std::vector<double>{0, 0}) == 1.0);
  CHECK_THROWS_AS(dice_loss(std::vector<double>{1, 0}, y), ShapeError);
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_probs(rng, 16);
    const auto y = random_binary(rng, 16);
    CHECK(max_rel_fd_error([&](const auto& q) { return dice_loss(q, y).value; }, p, dice_loss(p, y).grad) < 1e-4);
    CHECK(max_rel_fd_error([&](const auto& q) { return binary_cross_entropy(q, y).value; }, p,
                           binary_cross_entropy(p, y).grad) < 1e-4);
    CHECK(max_rel_fd_error([&](const auto& q) { return combined_seg_loss(q, y, 0.7, 1.3).value; }, p,
                           combined_seg_loss(p, y, 0.7, 1.3).grad) < 1e-4);
  }
  const std::vector<double> probs = {0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.4, 0.1};
  const std::vector<double> onehot = {0, 0, 1, 0, 1, 0, 0, 0};
  CHECK(max_rel_fd_error([&](const auto& q) { return categorical_cross_entropy(q, onehot, 4).value; }, probs,
                         categorical_cross_entropy(probs, onehot, 4).grad) < 1e-4);
}

TEST_CASE("combined loss composes its parts") {
  Rng rng(12);
  const auto p = random_probs(rng, 16);
  const auto y = random_binary(rng, 16);
  const double bce = binary_cross_entropy(p, y).value, dl = dice_loss(p, y).value;
  CHECK(combined_seg_loss(p, y, 1.0, 0.0).value == bce);
  CHECK(combined_seg_loss(p, y, 0.0, 1.0).value == dl);
  CHECK(std::abs(combined_seg_loss(p, y).value - (bce + dl)) <= 1e-9);
  CHECK_THROWS_AS(combined_seg_loss(p, y, 0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(combined_seg_loss(p, y, -1.0, 1.0), ValidationError);
}

TEST_CASE("confusion matrix and classification report") {
  using L = Label;
  SUBCASE("all correct") {
    std::vector<Label> t = {L::meningioma, L::glioma, L::pituitary, L::no_tumor,
                            L::meningioma, L::glioma, L::pituitary, L::no_tumor};
    const auto r = confusion_and_report(t, t);
    CHECK(r.accuracy == 1.0);
    for (std::size_t i = 0; i < kNumClasses; ++i)
      for (std::size_t j = 0; j < kNumClasses; ++j) CHECK(r.confusion.counts[i][j] == (i == j ? 2 : 0));
    for (const auto& m : r.per_class) {
      CHECK(m.precision.value == 1.0);
      CHECK(m.recall.value == 1.0);
      CHECK(m.f1.value == 1.0);
    }
    const auto ss = sensitivity_specificity(r.confusion, L::glioma);
    CHECK(ss.sensitivity.value == 1.0);
    CHECK(ss.specificity.value == 1.0);
  }
  SUBCASE("hand-counted example, A = meningioma, B = glioma") {
    const auto r = confusion_and_report(std::vector<Label>{L::meningioma, L::glioma, L::glioma, L::glioma},
                                        std::vector<Label>{L::meningioma, L::meningioma, L::glioma, L::glioma});
    CHECK(r.per_class[index_of(L::glioma)].precision.value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.per_class[index_of(L::meningioma)].recall.value == 0.5);
    CHECK(r.accuracy == 0.75);
    CHECK(r.confusion.total() == 4);
    const auto ss = sensitivity_specificity(r.confusion, L::meningioma);
    CHECK(ss.sensitivity.value == 0.5);
    CHECK(ss.specificity.value == 1.0);
    // No pituitary samples and no pituitary predictions.
    const auto& pit = r.per_class[index_of(L::pituitary)];
    CHECK(pit.precision.undefined);
    CHECK(pit.recall.undefined);
    CHECK(pit.recall.value == 0.0);
    CHECK(sensitivity_specificity(r.confusion, L::pituitary).sensitivity.undefined);
  }
  SUBCASE("conservation and micro recall") {
    Rng rng(13);
    std::vector<int> p, t;
    for (int i = 0; i < 200; ++i) {
      p.push_back(static_cast<int>(rng.below(4)));
      t.push_back(static_cast<int>(rng.below(4)));
    }
    const auto r = confusion_and_report(p, t);
    std::int64_t support = 0, tp = 0;
    for (Label l : kClassOrder) {
      support += r.confusion.support(l);
      tp += r.confusion.counts[index_of(l)][index_of(l)];
    }
    CHECK(support == 200);
    CHECK(static_cast<double>(tp) / static_cast<double>(support) == r.accuracy);
  }
  CHECK_THROWS_AS(confusion_and_report(std::vector<int>{0, 7}, std::vector<int>{0, 1}), ValidationError);
  CHECK_THROWS_AS(confusion_and_report(std::vector<Label>{}, std::vector<Label>{}), ValidationError);
}

TEST_CASE("squared distance transform matches brute force") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_mask(rng, 7 + static_cast<int>(rng.below(10)), 5 + static_cast<int>(rng.below(10)), 0.1);
    if (!m.foreground()) continue;
    const auto dt = squared_distance_transform(m);
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x) {
        double best = 1e18;
        for (int v = 0; v < m.height; ++v)
          for (int u = 0; u < m.width; ++u)
            if (m.at(v, u)) best = std::min(best, double((y - v) * (y - v) + (x - u) * (x - u)));
        CHECK(dt[static_cast<std::size_t>(y) * m.width + x] == best);
      }
  }
}
