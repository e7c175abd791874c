#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "neuroscan/checkpoint.hpp"
#include "neuroscan/classifier.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/segmenter.hpp"
#include "neuroscan/training.hpp"
#include "support.hpp"

using namespace neuroscan;
using namespace neuroscan::training;

namespace {

TrainConfig flat_config(StopMetric metric, int lr_patience, int stop_patience) {
  TrainConfig c = TrainConfig::preset_for(Task::classification);
  c.early_stop_metric = metric;
  c.lr_patience = lr_patience;
  c.early_stop_patience = stop_patience;
  return c;
}

/// Small phantom manifest split 0.5/0.25/0.25 under `dir`.
dataset::Manifest phantom_fixture(const fs::path& dir, std::size_t n, int size, std::uint64_t seed) {
  const auto m = dataset::generate_phantoms(n, size, seed, {0.25, 0.25, 0.25, 0.25}, dir);
  return dataset::split_manifest(m, {0.5, 0.25, 0.25}, seed);
}

TrainConfig quick_classifier_config() {
  TrainConfig c = TrainConfig::preset_for(Task::classification, "desk");
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 5;
  return c;
}

classifier::ClassifierSpec small_classifier() {
  classifier::ClassifierSpec s;
  s.input_height = 32;
  s.input_width = 32;
  s.freeze_backbone = false;
  s.dropout_rate = 0.2;
  return s;
}

}  // namespace

TEST_CASE("scheduler: two flat epochs reduce 0.001 to 0.0003") {
  const TrainConfig cfg = flat_config(StopMetric::val_accuracy, 2, 10);
  TrainState s = initial_state(cfg);
  s = step_scheduler(s, cfg, 0.5);
  CHECK(s.current_lr == 1e-3);
  CHECK(s.epochs_since_improvement == 0);
  s = step_scheduler(s, cfg, 0.5);
  CHECK(s.current_lr == 1e-3);
  s = step_scheduler(s, cfg, 0.5);
  CHECK(s.current_lr == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(s.lr_reductions == 1);
  s = step_scheduler(s, cfg, 0.5);
  s = step_scheduler(s, cfg, 0.5);
  CHECK(s.current_lr == doctest::Approx(9e-5).epsilon(1e-12));
  CHECK(s.lr_reductions == 2);
  CHECK(s.epochs_since_improvement == 4);
}

TEST_CASE("scheduler: an improving epoch keeps the rate and clears the counter") {
  const TrainConfig cfg = flat_config(StopMetric::val_loss, 2, 10);
  TrainState s = initial_state(cfg);
  s = step_scheduler(s, cfg, 1.0);
  s = step_scheduler(s, cfg, 1.0);
  CHECK(s.epochs_since_improvement == 1);
  s = step_scheduler(s, cfg, 0.9);
  CHECK(s.current_lr == 1e-3);
  CHECK(s.epochs_since_improvement == 0);
  CHECK(s.lr_wait == 0);
  CHECK(s.best_epoch == 3);
  // Changes within the tolerance are not improvements.
  s = step_scheduler(s, cfg, 0.9 - kImprovementDelta / 2);
  CHECK(s.epochs_since_improvement == 1);
  CHECK(s.best_metric == 0.9);
}

TEST_CASE("scheduler: rate is learning_rate * factor^k and never increases") {
  Rng rng(1);
  const TrainConfig cfg = flat_config(StopMetric::val_accuracy, 3, 1000);
  TrainState s = initial_state(cfg);
  double prev = s.current_lr;
  for (int i = 0; i < 200; ++i) {
    s = step_scheduler(s, cfg, rng.uniform());
    CHECK(s.current_lr <= prev);
    CHECK(s.current_lr == doctest::Approx(cfg.learning_rate * std::pow(cfg.lr_factor, s.lr_reductions)).epsilon(1e-12));
    prev = s.current_lr;
  }
}

TEST_CASE("early stop: [0.5, 0.6, 0.6, 0.6, 0.6] with patience 3") {
  const TrainConfig cfg = flat_config(StopMetric::val_accuracy, 2, 3);
  TrainState s = initial_state(cfg);
  int stopped_after = 0;
  for (double v : {0.5, 0.6, 0.6, 0.6, 0.6}) {
    s = step_scheduler(s, cfg, v);
    if (check_early_stop(s, cfg)) {
      stopped_after = s.epoch;
      break;
    }
  }
  CHECK(stopped_after == 5);
  CHECK(s.best_epoch == 2);
  CHECK(s.best_metric == 0.6);
}

TEST_CASE("early stop fires exactly at the patience threshold") {
  const TrainConfig cfg = flat_config(StopMetric::val_loss, 2, 5);
  TrainState s = initial_state(cfg);
  s.epochs_since_improvement = 4;
  CHECK_FALSE(check_early_stop(s, cfg));
  s.epochs_since_improvement = 5;
  CHECK(check_early_stop(s, cfg));
  // Always-improving metrics never trigger it.
  TrainState t = initial_state(cfg);
  for (int i = 0; i < 100; ++i) {
    t = step_scheduler(t, cfg, 1.0 - 0.001 * i);
    CHECK_FALSE(check_early_stop(t, cfg));
  }
}

TEST_CASE("adam: zero gradient without decay leaves parameters unchanged") {
  nn::Parameter p("w", {1, 1, 1, 3});
  p.value.data = {0.5F, -1.0F, 2.0F};
  const auto before = p.value.data;
  std::vector<nn::Parameter*> ps = {&p};
  AdamState st;
  for (int i = 0; i < 5; ++i) apply_adam_step(ps, st, 1e-3, 0.0);
  CHECK(p.value.data == before);
}

TEST_CASE("adam: the first step moves each scalar by about lr") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    nn::Parameter p("w", {1, 1, 1, 1});
    p.value.data[0] = static_cast<float>(rng.normal());
    const double g = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
    p.grad.data[0] = static_cast<float>(g);
    const float before = p.value.data[0];
    std::vector<nn::Parameter*> ps = {&p};
    AdamState st;
    apply_adam_step(ps, st, 1e-3, 0.0);
    const double delta = double(p.value.data[0]) - double(before);
    CHECK(std::abs(delta) == doctest::Approx(1e-3).epsilon(1e-3));
    CHECK((delta < 0) == (g > 0));
  }
}

TEST_CASE("adam: weight decay pulls parameters toward zero") {
  nn::Parameter p("w", {1, 1, 1, 2});
  p.value.data = {1.0F, -1.0F};
  std::vector<nn::Parameter*> ps = {&p};
  AdamState st;
  float prev0 = 1.0F, prev1 = -1.0F;
  for (int i = 0; i < 10; ++i) {
    p.zero_grad();
    apply_adam_step(ps, st, 1e-2, 0.1);
    CHECK(p.value.data[0] < prev0);
    CHECK(p.value.data[1] > prev1);
    prev0 = p.value.data[0];
    prev1 = p.value.data[1];
  }
}

TEST_CASE("adam: a non-finite gradient aborts before any update") {
  nn::Parameter a("a", {1, 1, 1, 2}), b("b", {1, 1, 1, 2});
  a.value.data = {1.0F, 2.0F};
  b.value.data = {3.0F, 4.0F};
  a.grad.data = {0.1F, 0.2F};
  b.grad.data = {0.1F, std::nanf("")};
  std::vector<nn::Parameter*> ps = {&a, &b};
  AdamState st;
  CHECK_THROWS_AS(apply_adam_step(ps, st, 1e-3, 0.0), NonFiniteError);
  CHECK(a.value.data == std::vector<float>{1.0F, 2.0F});
  CHECK(b.value.data == std::vector<float>{3.0F, 4.0F});
  CHECK(st.step == 0);
}

TEST_CASE("presets carry the published settings") {
  const TrainConfig c = TrainConfig::preset_for(Task::classification);
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.batch_size == 32);
  CHECK(c.weight_decay == 1e-4);
  CHECK(c.dropout_rate == 0.4);
  CHECK(c.epochs == 50);
  CHECK(c.lr_factor == 0.3);
  CHECK(c.lr_patience == 2);
  CHECK(c.early_stop_metric == StopMetric::val_accuracy);
  CHECK(c.early_stop_patience > c.lr_patience);
  const TrainConfig s = TrainConfig::preset_for(Task::segmentation);
  CHECK(s.learning_rate == 1e-4);
  CHECK(s.batch_size == 32);
  CHECK(s.weight_decay == 1e-4);
  CHECK(s.early_stop_metric == StopMetric::val_loss);
  CHECK(s.loss == LossKind::bce_dice);
  CHECK_THROWS_AS(TrainConfig::preset_for(Task::classification, "fast"), ValidationError);
}

TEST_CASE("config validation and JSON round trip") {
  TrainConfig c = TrainConfig::preset_for(Task::segmentation);
  c.seed = 99;
  c.w_bce = 0.5;
  CHECK(config_from_json(to_json(c), TrainConfig{}) == c);
  CHECK(config_hash(c) == config_hash(config_from_json(to_json(c), TrainConfig{})));
  TrainConfig d = c;
  d.seed = 100;
  CHECK(config_hash(c) != config_hash(d));
  CHECK(config_hash(c).size() == 16);

  auto bad = [&](auto mutate) {
    TrainConfig x = TrainConfig::preset_for(Task::classification);
    mutate(x);
    CHECK_THROWS_AS(x.validate(), ValidationError);
  };
  bad([](TrainConfig& x) { x.epochs = 0; });
  bad([](TrainConfig& x) { x.batch_size = 0; });
  bad([](TrainConfig& x) { x.learning_rate = 0; });
  bad([](TrainConfig& x) { x.lr_factor = 1.0; });
  bad([](TrainConfig& x) { x.lr_patience = 0; });
  bad([](TrainConfig& x) { x.loss = LossKind::dice; });
  CHECK_THROWS_AS(config_from_json({{"early_stop_metric", "val_f1"}}, TrainConfig{}), ValidationError);
}

TEST_CASE("resolve_run_dir precedence") {
  ::unsetenv("NEUROSCAN_RUN_DIR");
  CHECK(resolve_run_dir(std::nullopt) == fs::path("runs/latest"));
  ::setenv("NEUROSCAN_RUN_DIR", "/tmp/from_env", 1);
  CHECK(resolve_run_dir(std::nullopt) == fs::path("/tmp/from_env"));
  CHECK(resolve_run_dir(fs::path("explicit")) == fs::path("explicit"));
  ::unsetenv("NEUROSCAN_RUN_DIR");
}

TEST_CASE("one epoch writes history, config and a loadable checkpoint") {
  testing::TempDir dir("train1");
  const auto m = phantom_fixture(dir / "data", 16, 32, 3);
  auto model = classifier::build_classifier(small_classifier(), 3);
  TrainConfig cfg = quick_classifier_config();
  cfg.epochs = 1;
  TrainOptions opts;
  opts.run_dir = dir / "run";
  const TrainResult r = train(*model, m, cfg, opts);
  CHECK(r.state.history.size() == 1);
  CHECK(fs::exists(r.checkpoint_dir / checkpoint::kParamsFile));
  CHECK(fs::exists(r.checkpoint_dir / checkpoint::kSidecarFile));
  const auto hist = nlohmann::json::parse(testing::slurp(dir / "run/history.json"));
  CHECK(hist["epochs"].size() == 1);
  const auto conf = nlohmann::json::parse(testing::slurp(dir / "run/config.json"));
  CHECK(config_from_json(conf["train"], TrainConfig{}) == cfg);
  auto loaded = checkpoint::load_classifier(r.checkpoint_dir);
  CHECK(loaded->checksum() == r.checksum);
  CHECK(model->checksum() == r.checksum);
}

TEST_CASE("identical configs give identical histories and checksums") {
  testing::TempDir dir("det");
  const auto m = phantom_fixture(dir / "data", 16, 32, 4);
  TrainConfig cfg = quick_classifier_config();
  cfg.augment = true;
  auto run = [&](const std::string& name) {
    auto model = classifier::build_classifier(small_classifier(), cfg.seed);
    TrainOptions opts;
    opts.run_dir = dir / name;
    return train(*model, m, cfg, opts);
  };
  const TrainResult a = run("a");
  const TrainResult b = run("b");
  CHECK(a.checksum == b.checksum);
  CHECK(testing::slurp(dir / "a/history.json") == testing::slurp(dir / "b/history.json"));
  cfg.seed = 6;
  const TrainResult c = run("c");
  CHECK(c.checksum != a.checksum);
}

TEST_CASE("the retained checkpoint holds the best monitored value") {
  testing::TempDir dir("best");
  const auto m = phantom_fixture(dir / "data", 16, 32, 7);
  auto model = segmenter::build_segmenter(segmenter::SegmenterSpec::reduced(2, 4, 32), 7);
  TrainConfig cfg = TrainConfig::preset_for(Task::segmentation, "desk");
  cfg.epochs = 4;
  cfg.batch_size = 4;
  TrainOptions opts;
  opts.run_dir = dir / "run";
  const TrainResult r = train(*model, m, cfg, opts);
  double best = 1e300;
  for (const auto& e : r.state.history) best = std::min(best, e.val_loss);
  CHECK(r.state.best_metric == best);
  const auto side = checkpoint::read_sidecar(r.checkpoint_dir);
  CHECK(side["epoch"] == r.state.best_epoch);
  CHECK(side["monitor"] == "val_loss");
}

TEST_CASE("training rejects empty splits and mismatched losses") {
  testing::TempDir dir("errs");
  auto model = classifier::build_classifier(small_classifier(), 1);
  TrainOptions opts;
  opts.run_dir = dir / "run";
  CHECK_THROWS_AS(train(*model, std::vector<dataset::Sample>{}, std::vector<dataset::Sample>{},
                        quick_classifier_config(), opts),
                  ValidationError);
  const auto m = phantom_fixture(dir / "data", 16, 32, 8);
  TrainConfig seg = TrainConfig::preset_for(Task::segmentation, "desk");
  CHECK_THROWS_AS(train(*model, m, seg, opts), ValidationError);
}

TEST_CASE("a diverging run stops with NonFiniteError and keeps the last good checkpoint") {
  testing::TempDir dir("nan");
  const auto m = phantom_fixture(dir / "data", 16, 32, 9);
  auto model = classifier::build_classifier(small_classifier(), 9);
  TrainConfig cfg = quick_classifier_config();
  cfg.epochs = 3;
  TrainOptions opts;
  opts.run_dir = dir / "run";
  int calls = 0;
  opts.on_epoch = [&](const EpochRecord&) {
    // Poison a weight after the first epoch so the next forward pass diverges.
    if (++calls == 1) model->output_layer().weight.value.data[0] = std::numeric_limits<float>::infinity();
  };
  CHECK_THROWS_AS(train(*model, m, cfg, opts), NonFiniteError);
  CHECK(fs::exists(dir / "run/checkpoints/best" / checkpoint::kParamsFile));
  const auto hist = nlohmann::json::parse(testing::slurp(dir / "run/history.json"));
  CHECK(hist["epochs"].size() == 1);
}
