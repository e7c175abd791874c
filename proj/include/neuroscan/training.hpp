#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroscan/dataset.hpp"
#include "neuroscan/metrics.hpp"
#include "neuroscan/nn/model.hpp"
#include "neuroscan/preprocess.hpp"
#include "neuroscan/samples.hpp"

namespace neuroscan::training {

namespace fs = std::filesystem;

enum class Task { classification, segmentation };
enum class StopMetric { val_accuracy, val_loss };
/// cce for classification; bce, dice or bce_dice (weighted sum) for segmentation.
enum class LossKind { cce, bce, dice, bce_dice };

std::string_view to_string(Task t);
std::string_view to_string(StopMetric m);
std::string_view to_string(LossKind l);
Task task_from_string(std::string_view s);
StopMetric stop_metric_from_string(std::string_view s);
LossKind loss_from_string(std::string_view s);

/// Minimum change that counts as an improvement of the monitored metric.
inline constexpr double kImprovementDelta = 1e-5;

struct TrainConfig {
  Task task = Task::classification;
  std::string preset = "paper";
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double dropout_rate = 0.4;
  double lr_factor = 0.3;
  int lr_patience = 2;
  StopMetric early_stop_metric = StopMetric::val_accuracy;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;

  LossKind loss = LossKind::cce;
  double w_bce = 1.0;
  double w_dice = 1.0;
  bool augment = true;
  preprocess::AugmentationPolicy augmentation;

  /// Named bundle of defaults. "paper" follows the published settings for the
  /// task; "desk" is a short schedule for phantom-scale runs. Throws
  /// ValidationError for unknown names.
  static TrainConfig preset_for(Task task, const std::string& name = "paper");

  /// Throws ValidationError naming the violated constraint.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays the keys present in `j` onto `base` and validates the result.
TrainConfig config_from_json(const nlohmann::json& j, const TrainConfig& base);
/// 16 hex digits identifying a resolved configuration.
std::string config_hash(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;  // rate used during the epoch
  double train_loss = 0.0;
  double train_metric = 0.0;   // accuracy (classification) or mean Dice (segmentation)
  double val_loss = 0.0;
  double val_metric = 0.0;
  bool improved = false;

  nlohmann::json to_json(Task task) const;
};

struct TrainState {
  int epoch = 0;  // completed epochs
  double current_lr = 0.0;
  double best_metric = 0.0;
  int best_epoch = 0;  // 0 until the first epoch is recorded
  int epochs_since_improvement = 0;
  int lr_wait = 0;  // non-improving epochs since the last improvement or lr reduction
  int lr_reductions = 0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
};

bool maximize(StopMetric m);
bool is_improvement(double candidate, double best, StopMetric m);
TrainState initial_state(const TrainConfig& cfg);

/// Records one epoch's monitored value: advances the epoch, tracks the best
/// value, and multiplies the rate by lr_factor after lr_patience consecutive
/// non-improving epochs (the wait then restarts).
TrainState step_scheduler(TrainState state, const TrainConfig& cfg, double new_val_metric);

/// True once epochs_since_improvement reaches early_stop_patience.
bool check_early_stop(const TrainState& state, const TrainConfig& cfg);

// --- optimizer --------------------------------------------------------------

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

/// One bias-corrected Adam update of every parameter from its .grad, with
/// weight_decay * w added to the gradient first. Any non-finite gradient
/// throws NonFiniteError before a single value is modified.
void apply_adam_step(std::span<nn::Parameter* const> params, AdamState& state, double lr, double weight_decay,
                     const AdamSettings& settings = {});

// --- loop -------------------------------------------------------------------

/// Run directory precedence: explicit value, then $NEUROSCAN_RUN_DIR, then "runs/latest".
fs::path resolve_run_dir(const std::optional<fs::path>& flag);

struct TrainOptions {
  fs::path run_dir;
  /// Extra keys persisted in config.json next to "train" and "model".
  nlohmann::json run_config = nlohmann::json::object();
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  fs::path checkpoint_dir;
  std::uint64_t checksum = 0;  // parameters after restoring the best epoch
};

/// Trains on preloaded samples. Writes <run_dir>/config.json up front,
/// <run_dir>/history.json after every epoch and the best checkpoint to
/// <run_dir>/checkpoints/best/. The model ends holding the best epoch's
/// parameters. Throws ValidationError for empty splits or a loss that does not
/// fit the task, NonFiniteError when the loss or a gradient stops being finite
/// (the last good checkpoint is kept).
TrainResult train(nn::Model& model, const std::vector<dataset::Sample>& train_set,
                  const std::vector<dataset::Sample>& val_set, const TrainConfig& cfg, const TrainOptions& opts);

/// Loads the manifest's train and val splits at the model resolution and trains.
TrainResult train(nn::Model& model, const dataset::Manifest& manifest, const TrainConfig& cfg,
                  const TrainOptions& opts);

/// Loss of a probability batch against targets (one-hot rows or masks),
/// dispatched on the configured loss kind.
metrics::LossResult batch_loss(const TrainConfig& cfg, std::span<const double> probs,
                               std::span<const double> targets);

}  // namespace neuroscan::training
