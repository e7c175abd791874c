#include <doctest.h>

#include "neuroscan/dataset.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/metrics.hpp"
#include "neuroscan/pipeline.hpp"
#include "neuroscan/preprocess.hpp"
#include "neuroscan/training.hpp"
#include "support.hpp"

using namespace neuroscan;
using namespace neuroscan::pipeline;

namespace {

std::unique_ptr<classifier::ClassifierModel> biased_classifier(Label winner, int size = 32) {
  classifier::ClassifierSpec s;
  s.input_height = size;
  s.input_width = size;
  auto m = classifier::build_classifier(s, 1);
  // A large output bias makes the prediction independent of the image.
  m->output_layer().bias.value.data[index_of(winner)] = 100.0F;
  return m;
}

std::unique_ptr<segmenter::SegmenterModel> small_segmenter(int size = 32) {
  return segmenter::build_segmenter(segmenter::SegmenterSpec::reduced(2, 4, size), 2);
}

ImageTensor random_image(Rng& rng, int h, int w) {
  ImageTensor t(h, w);
  for (auto& v : t.pixels) v = static_cast<float>(rng.uniform());
  return t;
}

/// Independent overlay raster: gray base, then green truth edge, then red
/// predicted edge, using an explicit neighbour count.
RgbImage expected_overlay(const ImageTensor& img, const SegmentationMask& pred, const SegmentationMask* truth) {
  RgbImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(y, x), 0.0F, 1.0F) * 255.0F));
      out.set(y, x, g, g, g);
    }
  auto edge = [](const SegmentationMask& m, int y, int x) {
    if (!m.at(y, x)) return false;
    const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int v = y + dy[k], u = x + dx[k];
      if (v < 0 || u < 0 || v >= m.height || u >= m.width || !m.at(v, u)) return true;
    }
    return false;
  };
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (truth && edge(*truth, y, x)) out.set(y, x, 0, 255, 0);
      if (edge(pred, y, x)) out.set(y, x, 255, 0, 0);
    }
  return out;
}

}  // namespace

TEST_CASE("gating: a no_tumor prediction carries no mask unless gating is off") {
  auto cls = biased_classifier(Label::no_tumor);
  auto seg = small_segmenter();
  Rng rng(1);
  const ImageTensor img = random_image(rng, 48, 40);
  const CaseResult gated = run_case(*cls, *seg, img, true);
  CHECK(gated.predicted_label == Label::no_tumor);
  CHECK_FALSE(gated.mask.has_value());
  CHECK_FALSE(gated.to_json()["has_mask"].get<bool>());

  const CaseResult open = run_case(*cls, *seg, img, false);
  REQUIRE(open.mask.has_value());
  CHECK(open.mask->height == 48);
  CHECK(open.mask->width == 40);

  auto tumor = biased_classifier(Label::pituitary);
  const CaseResult t = run_case(*tumor, *seg, img, true);
  CHECK(t.predicted_label == Label::pituitary);
  CHECK(t.mask.has_value());
  CHECK_THROWS_AS(run_case(*tumor, *seg, img, true, 1.5), ValidationError);
}

TEST_CASE("overlay: empty mask renders the base image") {
  Rng rng(2);
  const ImageTensor img = random_image(rng, 20, 24);
  const RgbImage o = render_overlay(img, SegmentationMask(20, 24));
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 24; ++x) {
      const auto* p = &o.pixels[(static_cast<std::size_t>(y) * 24 + x) * 3];
      const auto g = static_cast<std::uint8_t>(std::lround(img.at(y, x) * 255.0F));
      CHECK(p[0] == g);
      CHECK(p[1] == g);
      CHECK(p[2] == g);
    }
  CHECK_THROWS_AS(render_overlay(img, SegmentationMask(20, 23)), ShapeError);
}

TEST_CASE("overlay: a full mask's contour is the image border") {
  SegmentationMask full(12, 9);
  std::fill(full.pixels.begin(), full.pixels.end(), 1);
  const SegmentationMask c = contour(full);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 9; ++x) CHECK(c.at(y, x) == ((y == 0 || x == 0 || y == 11 || x == 8) ? 1 : 0));
}

TEST_CASE("overlay: fixed phantom and mask give the expected raster and identical bytes") {
  const auto ph = dataset::render_phantom(Label::meningioma, 64, 21);
  const ImageTensor img = preprocess::normalize(ph.image);
  SegmentationMask pred = ph.mask;
  // Shift the prediction two pixels right so both contours are visible.
  for (int y = 0; y < 64; ++y)
    for (int x = 63; x >= 0; --x) pred.at(y, x) = x >= 2 ? ph.mask.at(y, x - 2) : 0;
  CHECK(render_overlay(img, pred, ph.mask) == expected_overlay(img, pred, &ph.mask));

  testing::TempDir dir("overlay");
  write_overlay(dir / "a.png", img, pred, ph.mask);
  write_overlay(dir / "b/c.png", img, pred, ph.mask);
  const std::string a = testing::slurp(dir / "a.png");
  CHECK(a.size() > 8);
  CHECK(a == testing::slurp(dir / "b/c.png"));
}

TEST_CASE("segmentation summary over three hand-built cases") {
  // Case masks on a 1x4 strip:
  //   c1: pred 1100, truth 1100 -> dice 1,   iou 1
  //   c2: pred 1100, truth 0110 -> dice 1/2, iou 1/3
  //   c3: pred 1000, truth 0001 -> dice 0,   iou 0
  auto strip = [](const char* bits) {
    SegmentationMask m(1, 4);
    for (int i = 0; i < 4; ++i) m.pixels[static_cast<std::size_t>(i)] = bits[i] == '1';
    return m;
  };
  std::vector<CaseResult> rs(4);
  const char* pairs[3][2] = {{"1100", "1100"}, {"1100", "0110"}, {"1000", "0001"}};
  for (int i = 0; i < 3; ++i) {
    rs[static_cast<std::size_t>(i)].case_id = "c" + std::to_string(i + 1);
    rs[static_cast<std::size_t>(i)].seg_scores = metrics::seg_scores(strip(pairs[i][0]), strip(pairs[i][1]));
  }
  rs[3].case_id = "c4";  // no scores: excluded
  const auto s = summarize_segmentation(rs);
  REQUIRE(s.has_value());
  CHECK(s->cases == 3);
  CHECK(std::abs(s->mean_dice - (1.0 + 0.5 + 0.0) / 3.0) <= 1e-9);
  CHECK(std::abs(s->mean_iou - (1.0 + 1.0 / 3.0 + 0.0) / 3.0) <= 1e-9);
  // Hausdorff: 0, 1 and 3.
  CHECK(std::abs(s->mean_hausdorff - 4.0 / 3.0) <= 1e-9);
  CHECK_FALSE(summarize_segmentation(std::vector<CaseResult>(2)).has_value());
}

TEST_CASE("evaluate_suite: conservation, ordering and written artifacts") {
  testing::TempDir dir("suite");
  auto m = dataset::generate_phantoms(12, 32, 4, {0.25, 0.25, 0.25, 0.25}, dir / "data");
  m = dataset::split_manifest(m, {0.5, 0.25, 0.25}, 4);
  auto cls = biased_classifier(Label::glioma);
  auto seg = small_segmenter();
  EvalOptions opts;
  opts.out_dir = dir / "out";
  const EvaluationReport r = evaluate_suite(*cls, *seg, m, Split::test, opts);
  CHECK(r.cases.size() == m.count(Split::test));
  CHECK(static_cast<std::size_t>(r.classification.confusion.total()) == r.cases.size());
  std::int64_t support = 0;
  for (Label l : kClassOrder) support += r.classification.confusion.support(l);
  CHECK(static_cast<std::size_t>(support) == r.cases.size());
  CHECK(std::is_sorted(r.cases.begin(), r.cases.end(),
                       [](const CaseResult& a, const CaseResult& b) { return a.case_id < b.case_id; }));
  for (const auto& c : r.cases) {
    CHECK(c.predicted_label == Label::glioma);
    CHECK(c.mask.has_value());
    CHECK(c.seg_scores.has_value());
    CHECK(fs::exists(dir / "out/overlays" / (c.case_id + ".png")));
  }
  REQUIRE(r.segmentation.has_value());
  CHECK(r.segmentation->cases == r.cases.size());
  const auto report = nlohmann::json::parse(testing::slurp(dir / "out/report.json"));
  CHECK(report == r.to_json());
  const std::string csv = testing::slurp(dir / "out/cases.csv");
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.cases.size() + 1);

  // Same inputs, same bytes.
  EvalOptions again = opts;
  again.out_dir = dir / "out2";
  evaluate_suite(*cls, *seg, m, Split::test, again);
  CHECK(testing::slurp(dir / "out/report.json") == testing::slurp(dir / "out2/report.json"));
  CHECK(csv == testing::slurp(dir / "out2/cases.csv"));
}

TEST_CASE("evaluate_suite: all-correct predictions and a split without masks") {
  testing::TempDir dir("suite2");
  auto m = dataset::generate_phantoms(8, 32, 5, {0.0, 0.0, 0.0, 1.0}, dir / "data");
  m = dataset::split_manifest(m, {0.5, 0.25, 0.25}, 5);
  for (auto& rec : m.records) rec.mask_ref.reset();
  auto cls = biased_classifier(Label::no_tumor);
  auto seg = small_segmenter();
  const EvaluationReport r = evaluate_suite(*cls, *seg, m, Split::test);
  CHECK(r.classification.accuracy == 1.0);
  CHECK_FALSE(r.segmentation.has_value());
  for (const auto& c : r.cases) CHECK_FALSE(c.mask.has_value());

  dataset::Manifest empty = m;
  for (auto& rec : empty.records) rec.split = Split::train;
  CHECK_THROWS_AS(evaluate_suite(*cls, *seg, empty, Split::test), ValidationError);
}

TEST_CASE("end to end: overfit models recover a phantom's label and mask") {
  const auto ph = dataset::render_phantom(Label::glioma, 32, 31);
  dataset::Sample s;
  s.case_id = "fixture";
  s.label = Label::glioma;
  s.image = preprocess::normalize(ph.image);
  s.mask = ph.mask;
  testing::TempDir dir("e2e");

  classifier::ClassifierSpec cs;
  cs.input_height = cs.input_width = 32;
  auto cls = classifier::build_classifier(cs, 31);
  auto ccfg = training::TrainConfig::preset_for(training::Task::classification, "desk");
  ccfg.epochs = 30;
  ccfg.batch_size = 1;
  ccfg.learning_rate = 1e-2;
  ccfg.dropout_rate = 0.0;
  ccfg.early_stop_metric = training::StopMetric::val_loss;
  training::TrainOptions o1;
  o1.run_dir = dir / "cls";
  training::train(*cls, {s}, {s}, ccfg, o1);

  auto seg = segmenter::build_segmenter(segmenter::SegmenterSpec::reduced(2, 8, 32), 31);
  auto scfg = training::TrainConfig::preset_for(training::Task::segmentation, "desk");
  scfg.epochs = 120;
  scfg.batch_size = 1;
  scfg.learning_rate = 3e-3;
  scfg.early_stop_patience = 1000;
  scfg.lr_patience = 1000;
  training::TrainOptions o2;
  o2.run_dir = dir / "seg";
  training::train(*seg, {s}, {s}, scfg, o2);

  const CaseResult r = run_case(*cls, *seg, s.image);
  CHECK(r.predicted_label == Label::glioma);
  REQUIRE(r.mask.has_value());
  CHECK(metrics::dice(*r.mask, ph.mask) >= 0.9);
}
