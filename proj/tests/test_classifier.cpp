#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "neuroscan/classifier.hpp"
#include "neuroscan/efficientnet.hpp"
#include "neuroscan/nn/archive.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/metrics.hpp"
#include "neuroscan/nn/batch.hpp"
#include "neuroscan/preprocess.hpp"
#include "neuroscan/dataset.hpp"
#include "neuroscan/training.hpp"
#include "support.hpp"

using namespace neuroscan;
using namespace neuroscan::classifier;

namespace {

ClassifierSpec small_spec(int size = 32) {
  ClassifierSpec s;
  s.input_height = size;
  s.input_width = size;
  return s;
}

std::vector<float> snapshot(const std::vector<nn::Parameter*>& ps) {
  std::vector<float> out;
  for (auto* p : ps) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  return out;
}

}  // namespace

TEST_CASE("classifier output is a probability row per sample") {
  auto model = build_classifier(small_spec(), 1);
  Rng rng(1);
  const nn::Tensor x = testing::random_tensor(rng, {2, 1, 32, 32});
  const nn::Tensor p = model->forward(x, nn::Mode::infer);
  REQUIRE(p.shape.n == 2);
  REQUIRE(p.numel() == 8);
  for (int n = 0; n < 2; ++n) {
    double sum = 0.0;
    for (float v : p.sample(n)) {
      CHECK(v >= 0.0F);
      CHECK(v <= 1.0F);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("frozen head: trainable tensors and widths") {
  auto model = build_classifier(small_spec(), 2);
  CHECK(model->trainable_count() == 64U * 512U + 512U + 512U * 4U + 4U);
  CHECK(model->trainable_count() == 35332U);
  CHECK(model->head_widths() == std::array<int, 2>{512, 4});
  for (auto* p : model->backbone_parameters()) CHECK_FALSE(p->trainable);

  ClassifierSpec open = small_spec();
  open.freeze_backbone = false;
  auto unfrozen = build_classifier(open, 2);
  CHECK(unfrozen->trainable_count() > 35332U);
}

TEST_CASE("same seed builds identical networks and outputs") {
  auto a = build_classifier(small_spec(), 7);
  auto b = build_classifier(small_spec(), 7);
  auto c = build_classifier(small_spec(), 8);
  CHECK(a->checksum() == b->checksum());
  CHECK(a->checksum() != c->checksum());
  Rng rng(3);
  const nn::Tensor x = testing::random_tensor(rng, {3, 1, 32, 32});
  CHECK(a->forward(x, nn::Mode::infer).data == b->forward(x, nn::Mode::infer).data);
}

TEST_CASE("an optimizer step leaves frozen backbone weights bit-identical") {
  auto model = build_classifier(small_spec(), 4);
  const auto before_backbone = snapshot(model->backbone_parameters());
  const auto before_head = snapshot(model->head_parameters());
  Rng rng(4);
  const nn::Tensor x = testing::random_tensor(rng, {4, 1, 32, 32});
  model->zero_grad();
  const nn::Tensor p = model->forward(x, nn::Mode::train);
  std::vector<double> probs(p.data.begin(), p.data.end()), onehot(16, 0.0);
  for (int i = 0; i < 4; ++i) onehot[static_cast<std::size_t>(i * 4 + i)] = 1.0;
  const auto loss = metrics::categorical_cross_entropy(probs, onehot, 4);
  nn::Tensor g(p.shape);
  std::transform(loss.grad.begin(), loss.grad.end(), g.data.begin(), [](double v) { return float(v); });
  model->backward(g);
  training::AdamState st;
  const auto params = model->trainable_parameters();
  training::apply_adam_step(params, st, 1e-2, 1e-4);
  CHECK(snapshot(model->backbone_parameters()) == before_backbone);
  CHECK(snapshot(model->head_parameters()) != before_head);
}

TEST_CASE("dropout is active only in training mode") {
  auto model = build_classifier(small_spec(), 5);
  Rng rng(5);
  const nn::Tensor x = testing::random_tensor(rng, {2, 1, 32, 32});
  const auto i1 = model->forward(x, nn::Mode::infer).data;
  const auto i2 = model->forward(x, nn::Mode::infer).data;
  CHECK(i1 == i2);
  model->reseed(1);
  const auto t1 = model->forward(x, nn::Mode::train).data;
  model->reseed(2);
  const auto t2 = model->forward(x, nn::Mode::train).data;
  CHECK(t1 != t2);
  model->reseed(1);
  CHECK(model->forward(x, nn::Mode::train).data == t1);

  ClassifierSpec s = small_spec();
  s.dropout_rate = 0.0;
  auto nodrop = build_classifier(s, 5);
  CHECK(nodrop->forward(x, nn::Mode::train).data == nodrop->forward(x, nn::Mode::infer).data);
}

TEST_CASE("inference is equivariant to a permutation of the batch") {
  auto model = build_classifier(small_spec(), 6);
  Rng rng(6);
  const nn::Tensor x = testing::random_tensor(rng, {5, 1, 32, 32});
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  nn::Tensor xp(x.shape);
  for (int i = 0; i < 5; ++i) std::copy_n(x.sample(perm[i]).begin(), x.sample(0).size(), xp.sample(i).begin());
  const nn::Tensor p = model->forward(x, nn::Mode::infer);
  const nn::Tensor pp = model->forward(xp, nn::Mode::infer);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 4; ++k)
      CHECK(pp.at(i, k, 0, 0) == doctest::Approx(p.at(perm[i], k, 0, 0)).epsilon(1e-5));
}

TEST_CASE("the head can overfit a single glioma image") {
  const auto ph = dataset::render_phantom(Label::glioma, 32, 9);
  const ImageTensor img = preprocess::normalize(ph.image);
  auto model = build_classifier(small_spec(), 9);
  dataset::Sample s;
  s.case_id = "one";
  s.label = Label::glioma;
  s.image = img;
  training::TrainConfig cfg = training::TrainConfig::preset_for(training::Task::classification, "desk");
  cfg.epochs = 40;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  cfg.dropout_rate = 0.0;
  cfg.early_stop_patience = 100;
  cfg.lr_patience = 100;
  // Accuracy saturates after a few steps; the loss keeps improving.
  cfg.early_stop_metric = training::StopMetric::val_loss;
  testing::TempDir dir("overfit");
  training::TrainOptions opts;
  opts.run_dir = dir.path();
  training::train(*model, {s}, {s}, cfg, opts);
  const auto probs = predict_class(*model, img);
  CHECK(probs.argmax() == Label::glioma);
  CHECK(probs.of(Label::glioma) > 0.9);
}

TEST_CASE("invalid classifier specs are rejected") {
  CHECK_THROWS_AS(backbone_from_string("resnet50"), ValidationError);
  ClassifierSpec s = small_spec();
  s.backbone = BackboneKind::pretrained_b1;
  CHECK_THROWS_AS(build_classifier(s), ValidationError);
  s = small_spec();
  s.dropout_rate = 1.0;
  CHECK_THROWS_AS(build_classifier(s), ValidationError);
  s = small_spec();
  s.hidden_units = 0;
  CHECK_THROWS_AS(build_classifier(s), ValidationError);
  auto model = build_classifier(small_spec());
  CHECK_THROWS_AS(predict_class(*model, ImageTensor(30, 32)), ShapeError);
  CHECK(spec_from_json(to_json(small_spec())) == small_spec());
}

TEST_CASE("pretrained_b1 builds from an archive and stays frozen") {
  testing::TempDir dir("b1");
  efficientnet::EfficientNetB1 net;
  net.init_random(3);
  std::vector<nn::Parameter*> ps;
  net.collect(ps);
  nn::write_tensors(dir / "b1.bin", std::vector<const nn::Parameter*>(ps.begin(), ps.end()));
  CHECK(net.block_count() == 23);

  ClassifierSpec s = small_spec(64);
  s.backbone = BackboneKind::pretrained_b1;
  s.backbone_weights = dir / "b1.bin";
  auto model = build_classifier(s, 1);
  CHECK(model->trainable_count() == 1280U * 512U + 512U + 512U * 4U + 4U);
  Rng rng(3);
  const nn::Tensor p = model->forward(testing::random_tensor(rng, {2, 1, 64, 64}), nn::Mode::infer);
  CHECK(p.numel() == 8);
  CHECK(p.at(0, 0, 0, 0) + p.at(0, 1, 0, 0) + p.at(0, 2, 0, 0) + p.at(0, 3, 0, 0) == doctest::Approx(1.0));

  s.freeze_backbone = false;
  CHECK_THROWS_AS(build_classifier(s), ValidationError);
  s.freeze_backbone = true;
  s.backbone_weights = dir / "missing.bin";
  CHECK_THROWS_AS(build_classifier(s), ValidationError);
}
