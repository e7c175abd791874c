#include "neuroscan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "neuroscan/checkpoint.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/nn/batch.hpp"
#include "neuroscan/rng.hpp"

namespace neuroscan::training {

std::string_view to_string(Task t) { return t == Task::classification ? "classification" : "segmentation"; }
std::string_view to_string(StopMetric m) { return m == StopMetric::val_accuracy ? "val_accuracy" : "val_loss"; }
std::string_view to_string(LossKind l) {
  switch (l) {
    case LossKind::cce: return "cce";
    case LossKind::bce: return "bce";
    case LossKind::dice: return "dice";
    case LossKind::bce_dice: return "bce_dice";
  }
  return "unknown";
}

Task task_from_string(std::string_view s) {
  if (s == "classification") return Task::classification;
  if (s == "segmentation") return Task::segmentation;
  throw ValidationError("unknown task '" + std::string(s) + "' (expected classification or segmentation)");
}

StopMetric stop_metric_from_string(std::string_view s) {
  if (s == "val_accuracy") return StopMetric::val_accuracy;
  if (s == "val_loss") return StopMetric::val_loss;
  throw ValidationError("unknown early_stop_metric '" + std::string(s) + "' (expected val_accuracy or val_loss)");
}

LossKind loss_from_string(std::string_view s) {
  for (LossKind l : {LossKind::cce, LossKind::bce, LossKind::dice, LossKind::bce_dice}) {
    if (to_string(l) == s) return l;
  }
  throw ValidationError("unknown loss '" + std::string(s) + "' (expected cce, bce, dice or bce_dice)");
}

TrainConfig TrainConfig::preset_for(Task task, const std::string& name) {
  TrainConfig c;
  c.task = task;
  c.preset = name;
  if (name == "paper") {
    if (task == Task::classification) {
      // lr 0.001, batch 32, weight decay 1e-4, dropout 0.4, 50 epochs,
      // lr x0.3 after 2 flat epochs, early stopping on validation accuracy.
      c.early_stop_metric = StopMetric::val_accuracy;
      c.loss = LossKind::cce;
    } else {
      c.learning_rate = 1e-4;
      c.early_stop_metric = StopMetric::val_loss;
      c.loss = LossKind::bce_dice;
    }
    return c;
  }
  if (name == "desk") {
    c.augment = false;
    c.early_stop_patience = 10;
    if (task == Task::classification) {
      c.epochs = 100;
      c.batch_size = 8;
      c.learning_rate = 3e-3;
      c.dropout_rate = 0.2;
      c.lr_patience = 10;
      c.early_stop_patience = 30;
      c.loss = LossKind::cce;
    } else {
      c.epochs = 30;
      c.batch_size = 8;
      c.learning_rate = 1e-3;
      c.early_stop_metric = StopMetric::val_loss;
      c.loss = LossKind::bce_dice;
    }
    return c;
  }
  throw ValidationError("unknown preset '" + name + "' (expected paper or desk)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must lie in [0, 1)");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw ValidationError("lr_factor must lie in (0, 1)");
  if (lr_patience < 1) throw ValidationError("lr_patience must be >= 1");
  if (early_stop_patience < 1) throw ValidationError("early_stop_patience must be >= 1");
  if (task == Task::classification && loss != LossKind::cce) {
    throw ValidationError("classification trains with the cce loss");
  }
  if (task == Task::segmentation && loss == LossKind::cce) {
    throw ValidationError("segmentation trains with bce, dice or bce_dice");
  }
  if (!(w_bce >= 0.0) || !(w_dice >= 0.0)) throw ValidationError("loss weights must be >= 0");
  if (loss == LossKind::bce_dice && w_bce == 0.0 && w_dice == 0.0) {
    throw ValidationError("w_bce and w_dice cannot both be zero");
  }
  augmentation.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"task", std::string(to_string(c.task))},
          {"preset", c.preset},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"dropout_rate", c.dropout_rate},
          {"lr_factor", c.lr_factor},
          {"lr_patience", c.lr_patience},
          {"early_stop_metric", std::string(to_string(c.early_stop_metric))},
          {"early_stop_patience", c.early_stop_patience},
          {"seed", c.seed},
          {"loss", std::string(to_string(c.loss))},
          {"w_bce", c.w_bce},
          {"w_dice", c.w_dice},
          {"augment", c.augment},
          {"augmentation", preprocess::to_json(c.augmentation)}};
}

TrainConfig config_from_json(const nlohmann::json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ValidationError("training config must be a JSON object");
  TrainConfig c = base;
  try {
    if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
    c.preset = j.value("preset", c.preset);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.lr_factor = j.value("lr_factor", c.lr_factor);
    c.lr_patience = j.value("lr_patience", c.lr_patience);
    if (j.contains("early_stop_metric")) {
      c.early_stop_metric = stop_metric_from_string(j.at("early_stop_metric").get<std::string>());
    }
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss")) c.loss = loss_from_string(j.at("loss").get<std::string>());
    c.w_bce = j.value("w_bce", c.w_bce);
    c.w_dice = j.value("w_dice", c.w_dice);
    c.augment = j.value("augment", c.augment);
    if (j.contains("augmentation")) c.augmentation = preprocess::policy_from_json(j.at("augmentation"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(cfg).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return nn::checksum_hex(h);
}

nlohmann::json EpochRecord::to_json(Task task) const {
  const char* metric = task == Task::classification ? "accuracy" : "dice";
  return {{"epoch", epoch},
          {"learning_rate", learning_rate},
          {"train_loss", train_loss},
          {std::string("train_") + metric, train_metric},
          {"val_loss", val_loss},
          {std::string("val_") + metric, val_metric},
          {"improved", improved}};
}

// --- scheduler / early stopping ---------------------------------------------

bool maximize(StopMetric m) { return m == StopMetric::val_accuracy; }

bool is_improvement(double candidate, double best, StopMetric m) {
  if (!std::isfinite(candidate)) return false;
  if (!std::isfinite(best)) return true;
  return maximize(m) ? candidate > best + kImprovementDelta : candidate < best - kImprovementDelta;
}

TrainState initial_state(const TrainConfig& cfg) {
  TrainState s;
  s.current_lr = cfg.learning_rate;
  s.best_metric = maximize(cfg.early_stop_metric) ? -std::numeric_limits<double>::infinity()
                                                  : std::numeric_limits<double>::infinity();
  return s;
}

TrainState step_scheduler(TrainState s, const TrainConfig& cfg, double new_val_metric) {
  ++s.epoch;
  if (is_improvement(new_val_metric, s.best_metric, cfg.early_stop_metric)) {
    s.best_metric = new_val_metric;
    s.best_epoch = s.epoch;
    s.epochs_since_improvement = 0;
    s.lr_wait = 0;
    return s;
  }
  ++s.epochs_since_improvement;
  if (++s.lr_wait >= cfg.lr_patience) {
    s.current_lr *= cfg.lr_factor;
    s.lr_wait = 0;
    ++s.lr_reductions;
  }
  return s;
}

bool check_early_stop(const TrainState& s, const TrainConfig& cfg) {
  return s.epochs_since_improvement >= cfg.early_stop_patience;
}

// --- Adam -------------------------------------------------------------------

void apply_adam_step(std::span<nn::Parameter* const> params, AdamState& st, double lr, double wd,
                     const AdamSettings& a) {
  for (const nn::Parameter* p : params) {
    for (float g : p->grad.data) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in '" + p->name + "'");
    }
  }
  if (st.m.size() != params.size()) {
    st.m.clear();
    st.v.clear();
    for (const nn::Parameter* p : params) {
      st.m.emplace_back(p->value.numel(), 0.0F);
      st.v.emplace_back(p->value.numel(), 0.0F);
    }
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Parameter& p = *params[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    if (m.size() != p.value.numel()) throw ShapeError("optimizer state does not match parameter '" + p.name + "'");
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      const double w = p.value.data[i];
      const double g = static_cast<double>(p.grad.data[i]) + wd * w;
      const double mi = a.beta1 * m[i] + (1.0 - a.beta1) * g;
      const double vi = a.beta2 * v[i] + (1.0 - a.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p.value.data[i] = static_cast<float>(w - lr * (mi / bc1) / (std::sqrt(vi / bc2) + a.eps));
    }
  }
}

// --- loop -------------------------------------------------------------------

fs::path resolve_run_dir(const std::optional<fs::path>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("NEUROSCAN_RUN_DIR"); env != nullptr && *env != '\0') return env;
  return "runs/latest";
}

metrics::LossResult batch_loss(const TrainConfig& cfg, std::span<const double> probs,
                               std::span<const double> targets) {
  switch (cfg.loss) {
    case LossKind::cce: return metrics::categorical_cross_entropy(probs, targets, static_cast<int>(kNumClasses));
    case LossKind::bce: return metrics::binary_cross_entropy(probs, targets);
    case LossKind::dice: return metrics::dice_loss(probs, targets);
    case LossKind::bce_dice: return metrics::combined_seg_loss(probs, targets, cfg.w_bce, cfg.w_dice);
  }
  throw std::logic_error("unhandled loss kind");
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

struct Batch {
  nn::Tensor input;
  std::vector<double> targets;  // one-hot rows or flattened masks
  std::vector<Label> labels;
  std::vector<SegmentationMask> masks;
};

Batch make_batch(const std::vector<dataset::Sample>& set, std::span<const std::size_t> idx, const TrainConfig& cfg,
                 bool augment, int epoch) {
  Batch b;
  std::vector<ImageTensor> images;
  images.reserve(idx.size());
  for (std::size_t i : idx) {
    const dataset::Sample& s = set[i];
    if (augment) {
      const std::uint64_t draw = derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), i, 0xa119ULL});
      auto [img, mask] = preprocess::augment(s.image, s.mask, cfg.augmentation, draw);
      images.push_back(std::move(img));
      if (mask) b.masks.push_back(std::move(*mask));
    } else {
      images.push_back(s.image);
      if (s.mask) b.masks.push_back(*s.mask);
    }
    b.labels.push_back(s.label);
  }
  std::vector<const ImageTensor*> ptrs;
  for (const auto& im : images) ptrs.push_back(&im);
  b.input = nn::to_batch(ptrs);
  if (cfg.task == Task::classification) {
    b.targets.assign(idx.size() * kNumClasses, 0.0);
    for (std::size_t r = 0; r < b.labels.size(); ++r) b.targets[r * kNumClasses + index_of(b.labels[r])] = 1.0;
  } else {
    if (b.masks.size() != idx.size()) throw ValidationError("segmentation training needs a mask for every case");
    for (const auto& m : b.masks) b.targets.insert(b.targets.end(), m.pixels.begin(), m.pixels.end());
  }
  return b;
}

// Sum of per-sample metric values (correct predictions or hard Dice at 0.5).
double batch_metric_sum(const TrainConfig& cfg, const nn::Tensor& probs, const Batch& b) {
  double sum = 0.0;
  const int n = probs.shape.n;
  if (cfg.task == Task::classification) {
    for (int r = 0; r < n; ++r) {
      const auto row = probs.sample(r);
      const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      sum += arg == index_of(b.labels[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
    }
  } else {
    for (int r = 0; r < n; ++r) {
      const auto row = probs.sample(r);
      const SegmentationMask& truth = b.masks[static_cast<std::size_t>(r)];
      SegmentationMask pred(truth.height, truth.width);
      for (std::size_t i = 0; i < row.size(); ++i) pred.pixels[i] = row[i] >= 0.5F ? 1 : 0;
      sum += metrics::dice(pred, truth);
    }
  }
  return sum;
}

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NonFiniteError("non-finite loss " + where);
}

struct Totals {
  double loss = 0.0;
  double metric = 0.0;
  std::size_t count = 0;

  void add(double batch_loss, double metric_sum, std::size_t n) {
    loss += batch_loss * static_cast<double>(n);
    metric += metric_sum;
    count += n;
  }
  double mean_loss() const { return count ? loss / static_cast<double>(count) : 0.0; }
  double mean_metric() const { return count ? metric / static_cast<double>(count) : 0.0; }
};

Totals evaluate(nn::Model& model, const std::vector<dataset::Sample>& set, const TrainConfig& cfg) {
  Totals t;
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::span<const std::size_t> idx(order.data() + start, std::min(bs, order.size() - start));
    const Batch b = make_batch(set, idx, cfg, false, 0);
    const nn::Tensor probs = model.forward(b.input, nn::Mode::infer);
    const std::vector<double> p(probs.data.begin(), probs.data.end());
    const double loss = batch_loss(cfg, p, b.targets).value;
    check_finite(loss, "during validation");
    t.add(loss, batch_metric_sum(cfg, probs, b), idx.size());
  }
  return t;
}

std::vector<std::vector<float>> snapshot(nn::Model& model) {
  std::vector<std::vector<float>> out;
  for (const nn::Parameter* p : model.parameters()) out.push_back(p->value.data);
  return out;
}

void restore(nn::Model& model, const std::vector<std::vector<float>>& snap) {
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = snap[i];
}

nlohmann::json history_json(const TrainState& s, const TrainConfig& cfg) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : s.history) epochs.push_back(r.to_json(cfg.task));
  return {{"task", std::string(to_string(cfg.task))},
          {"monitor", std::string(to_string(cfg.early_stop_metric))},
          {"best_epoch", s.best_epoch},
          {"best_metric", s.best_epoch > 0 ? nlohmann::json(s.best_metric) : nlohmann::json(nullptr)},
          {"lr_reductions", s.lr_reductions},
          {"stopped_early", s.stopped_early},
          {"epochs", epochs}};
}

}  // namespace

TrainResult train(nn::Model& model, const std::vector<dataset::Sample>& train_set,
                  const std::vector<dataset::Sample>& val_set, const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (model.task() != to_string(cfg.task)) {
    throw ValidationError("config task " + std::string(to_string(cfg.task)) + " does not match a " + model.task() +
                          " model");
  }
  if (train_set.empty()) throw ValidationError("the train split is empty");
  if (val_set.empty()) throw ValidationError("the val split is empty");
  if (opts.run_dir.empty()) throw ValidationError("no run directory given");

  const fs::path ckpt_dir = opts.run_dir / "checkpoints" / "best";
  fs::create_directories(opts.run_dir);
  nlohmann::json config = opts.run_config.is_object() ? opts.run_config : nlohmann::json::object();
  config["train"] = to_json(cfg);
  config["model"] = model.describe();
  config["train_config_hash"] = config_hash(cfg);
  write_json(opts.run_dir / "config.json", config);

  TrainState state = initial_state(cfg);
  AdamState adam;
  std::vector<std::vector<float>> best;
  const std::vector<nn::Parameter*> trainable = model.trainable_parameters();

  std::vector<std::size_t> order(train_set.size());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  try {
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), 0x5f1eULL}));
      shuffle_rng.shuffle(order.begin(), order.end());
      model.reseed(derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), 0xd40bULL}));

      EpochRecord rec;
      rec.epoch = epoch;
      rec.learning_rate = state.current_lr;
      Totals tr;
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::span<const std::size_t> idx(order.data() + start, std::min(bs, order.size() - start));
        const Batch b = make_batch(train_set, idx, cfg, cfg.augment, epoch);
        const nn::Tensor probs = model.forward(b.input, nn::Mode::train);
        const std::vector<double> p(probs.data.begin(), probs.data.end());
        const metrics::LossResult loss = batch_loss(cfg, p, b.targets);
        check_finite(loss.value, "at epoch " + std::to_string(epoch) + ", batch starting at " + std::to_string(start));
        nn::Tensor grad(probs.shape);
        for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = static_cast<float>(loss.grad[i]);
        model.zero_grad();
        model.backward(grad);
        try {
          apply_adam_step(trainable, adam, state.current_lr, cfg.weight_decay);
        } catch (const NonFiniteError& e) {
          throw NonFiniteError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
        }
        tr.add(loss.value, batch_metric_sum(cfg, probs, b), idx.size());
      }
      rec.train_loss = tr.mean_loss();
      rec.train_metric = tr.mean_metric();

      const Totals va = evaluate(model, val_set, cfg);
      rec.val_loss = va.mean_loss();
      rec.val_metric = va.mean_metric();
      const double monitored = cfg.early_stop_metric == StopMetric::val_accuracy ? rec.val_metric : rec.val_loss;

      state = step_scheduler(state, cfg, monitored);
      rec.improved = state.best_epoch == epoch;
      state.history.push_back(rec);
      if (rec.improved) {
        best = snapshot(model);
        checkpoint::save(model, ckpt_dir,
                         {{"train_config_hash", config_hash(cfg)},
                          {"epoch", epoch},
                          {"monitor", std::string(to_string(cfg.early_stop_metric))},
                          {"monitored_value", monitored}});
      }
      write_json(opts.run_dir / "history.json", history_json(state, cfg));
      if (opts.on_epoch) opts.on_epoch(rec);
      if (check_early_stop(state, cfg)) {
        state.stopped_early = epoch < cfg.epochs;
        break;
      }
    }
  } catch (const NonFiniteError& e) {
    if (!best.empty()) restore(model, best);
    write_json(opts.run_dir / "history.json", history_json(state, cfg));
    throw NonFiniteError(std::string(e.what()) + "; training aborted" +
                         (best.empty() ? std::string(", no checkpoint was written")
                                       : ", last good checkpoint kept at " + ckpt_dir.string()));
  }
  if (!best.empty()) restore(model, best);
  write_json(opts.run_dir / "history.json", history_json(state, cfg));

  TrainResult result;
  result.state = std::move(state);
  result.checkpoint_dir = ckpt_dir;
  result.checksum = model.checksum();
  return result;
}

TrainResult train(nn::Model& model, const dataset::Manifest& manifest, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  const bool masks = cfg.task == Task::segmentation;
  const auto tr = manifest.in_split(Split::train);
  const auto va = manifest.in_split(Split::val);
  if (tr.empty()) throw ValidationError("the manifest's train split is empty");
  if (va.empty()) throw ValidationError("the manifest's val split is empty (run split_manifest / prepare --split)");
  const auto train_set = dataset::load_samples(tr, model.input_height(), model.input_width(), masks);
  const auto val_set = dataset::load_samples(va, model.input_height(), model.input_width(), masks);
  return train(model, train_set, val_set, cfg, opts);
}

}  // namespace neuroscan::training
