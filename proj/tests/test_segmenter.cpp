#include <doctest.h>

#include "neuroscan/dataset.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/metrics.hpp"
#include "neuroscan/nn/batch.hpp"
#include "neuroscan/preprocess.hpp"
#include "neuroscan/segmenter.hpp"
#include "neuroscan/training.hpp"
#include "support.hpp"

using namespace neuroscan;
using namespace neuroscan::segmenter;

TEST_CASE("default segmenter: 256x256 probabilities and the 23/10 layer counts") {
  auto model = build_segmenter(SegmenterSpec{}, 1);
  const auto& a = model->audit();
  CHECK(a.conv_layers == 23);
  CHECK(a.residual_blocks == 10);
  CHECK(a.up_convolutions == 4);
  CHECK(a.skip_connections == 4);
  CHECK(a.bottleneck_channels == 1024);
  CHECK(a.encoder_channels == std::vector<int>{64, 128, 256, 512});
  Rng rng(1);
  ImageTensor img(256, 256);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  const ImageTensor p = predict_probabilities(*model, img);
  CHECK(p.height == 256);
  CHECK(p.width == 256);
  for (float v : p.pixels) {
    CHECK(v >= 0.0F);
    CHECK(v <= 1.0F);
  }
}

TEST_CASE("reduced variant keeps the topology rules") {
  const SegmenterSpec s = SegmenterSpec::reduced(2, 8, 64);
  CHECK(s.bottleneck_filters == 32);
  auto model = build_segmenter(s, 2);
  CHECK(model->audit().bottleneck_channels == 32);
  CHECK(model->audit().encoder_channels == std::vector<int>{8, 16});
  CHECK(model->audit().conv_layers == 2 * s.residual_blocks + 3);
  CHECK(spec_from_json(to_json(s)) == s);
}

TEST_CASE("invalid segmenter specs are rejected") {
  SegmenterSpec s = SegmenterSpec::reduced(2, 8, 64);
  s.input_height = 66;
  CHECK_THROWS_AS(build_segmenter(s), ValidationError);
  s = SegmenterSpec::reduced(2, 8, 64);
  s.bottleneck_filters = 48;
  CHECK_THROWS_AS(build_segmenter(s), ValidationError);
  s = SegmenterSpec::reduced(2, 8, 64);
  s.filter_size = 4;
  CHECK_THROWS_AS(build_segmenter(s), ValidationError);
  s = SegmenterSpec::reduced(2, 8, 64);
  s.residual_blocks = 4;
  CHECK_THROWS_AS(build_segmenter(s), ValidationError);
  auto model = build_segmenter(SegmenterSpec::reduced(2, 8, 64));
  CHECK_THROWS_AS(predict_mask(*model, ImageTensor(64, 64), 1.0), ValidationError);
  CHECK_THROWS_AS(predict_mask(*model, ImageTensor(64, 64), 0.0), ValidationError);
  CHECK_THROWS_AS(predict_mask(*model, ImageTensor(32, 64), 0.5), ShapeError);
}

TEST_CASE("threshold_map binarizes with >=") {
  ImageTensor probs(1, 4);
  probs.pixels = {0.1F, 0.3F, 0.39F, 0.2F};
  CHECK(threshold_map(probs, 0.4).foreground() == 0);
  probs.pixels = {0.1F, 0.4F, 0.6F, 0.99F};
  const auto m = threshold_map(probs, 0.4);
  CHECK(m.pixels == std::vector<std::uint8_t>{0, 1, 1, 1});
  CHECK(m.threshold_used == 0.4);
}

TEST_CASE("raising the threshold never grows the mask") {
  auto model = build_segmenter(SegmenterSpec::reduced(2, 8, 32), 3);
  Rng rng(3);
  ImageTensor img(32, 32);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  const ImageTensor p = predict_probabilities(*model, img);
  SegmentationMask prev = threshold_map(p, 0.01);
  for (double t = 0.05; t < 1.0; t += 0.05) {
    const SegmentationMask m = threshold_map(p, t);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.pixels[i] <= prev.pixels[i]);
    prev = m;
  }
}

TEST_CASE("ablating a skip connection changes the output") {
  auto model = build_segmenter(SegmenterSpec::reduced(2, 8, 32), 4);
  Rng rng(4);
  const nn::Tensor x = testing::random_tensor(rng, {1, 1, 32, 32});
  const auto base = model->forward(x, nn::Mode::infer).data;
  for (int level = 0; level < 2; ++level) {
    model->set_skip_ablated(level, true);
    CHECK(model->forward(x, nn::Mode::infer).data != base);
    model->set_skip_ablated(level, false);
  }
  CHECK(model->forward(x, nn::Mode::infer).data == base);
}

TEST_CASE("segmenter input gradient matches central differences") {
  SegmenterSpec s = SegmenterSpec::reduced(1, 2, 8);
  s.use_batch_norm = false;
  auto model = build_segmenter(s, 5);
  Rng rng(5);
  nn::Tensor x = testing::random_tensor(rng, {1, 1, 8, 8});
  const nn::Tensor w = testing::random_tensor(rng, {1, 1, 8, 8});
  auto objective = [&](const nn::Tensor& in) {
    const nn::Tensor p = model->forward(in, nn::Mode::infer);
    double acc = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) acc += double(p.data[i]) * w.data[i];
    return acc;
  };
  // Parameter gradients: perturb a sample of weights.
  model->zero_grad();
  model->forward(x, nn::Mode::train);
  model->backward(w);
  int checked = 0;
  for (auto* prm : model->trainable_parameters()) {
    for (std::size_t i = 0; i < prm->value.numel(); i += 7) {
      const float keep = prm->value.data[i];
      const float h = 3e-4F;
      const double mid = objective(x);
      prm->value.data[i] = keep + h;
      const double up = objective(x);
      prm->value.data[i] = keep - h;
      const double down = objective(x);
      prm->value.data[i] = keep;
      // ReLU and max-pool kinks make the objective piecewise smooth; when a
      // step crosses one, the analytic value sits between the one-sided slopes.
      const double fwd = (up - mid) / h, bwd = (mid - down) / h, central = (up - down) / (2.0 * h);
      const double ana = prm->grad.data[i];
      const double tol = 5e-3 + 1e-2 * std::abs(central);
      const bool ok = std::abs(central - ana) <= tol ||
                      (ana >= std::min(fwd, bwd) - tol && ana <= std::max(fwd, bwd) + tol);
      if (!ok) MESSAGE(prm->name << "[" << i << "] central " << central << " analytic " << ana);
      CHECK(ok);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("the segmenter can overfit a single phantom") {
  const auto ph = dataset::render_phantom(Label::meningioma, 32, 11);
  dataset::Sample s;
  s.case_id = "one";
  s.label = Label::meningioma;
  s.image = preprocess::normalize(ph.image);
  s.mask = ph.mask;
  auto model = build_segmenter(SegmenterSpec::reduced(2, 8, 32), 11);
  training::TrainConfig cfg = training::TrainConfig::preset_for(training::Task::segmentation, "desk");
  cfg.epochs = 150;
  cfg.batch_size = 1;
  cfg.learning_rate = 3e-3;
  cfg.early_stop_patience = 1000;
  cfg.lr_patience = 1000;
  testing::TempDir dir("segfit");
  training::TrainOptions opts;
  opts.run_dir = dir.path();
  training::train(*model, {s}, {s}, cfg, opts);
  const auto mask = predict_mask(*model, s.image, 0.5);
  CHECK(metrics::dice(mask, ph.mask) >= 0.99);
}
