#include "neuroscan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "neuroscan/checkpoint.hpp"
#include "neuroscan/classifier.hpp"
#include "neuroscan/dataset.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/pipeline.hpp"
#include "neuroscan/png_io.hpp"
#include "neuroscan/preprocess.hpp"
#include "neuroscan/segmenter.hpp"
#include "neuroscan/training.hpp"

namespace neuroscan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ValidationError("config file " + path.string() + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json section(const json& file, const char* key) {
  if (!file.contains(key)) return json::object();
  if (!file.at(key).is_object()) throw ValidationError(std::string("config key '") + key + "' must be an object");
  return file.at(key);
}

template <typename T>
std::optional<T> file_value(const json& file, const char* key) {
  if (!file.contains(key) || file.at(key).is_null()) return std::nullopt;
  try {
    return file.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::array<double, kNumClasses> parse_mix(const std::string& text) {
  std::array<double, kNumClasses> mix{};
  std::stringstream ss(text);
  std::string tok;
  std::size_t i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= kNumClasses) throw ValidationError("--mix takes exactly 4 proportions");
    try {
      std::size_t used = 0;
      mix[i] = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("--mix: '" + tok + "' is not a number");
    }
    ++i;
  }
  if (i != kNumClasses) throw ValidationError("--mix takes exactly 4 proportions");
  return mix;
}

/// Accepts a checkpoint directory or a run directory holding checkpoints/best.
fs::path checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / checkpoint::kSidecarFile)) return p;
  if (fs::exists(p / "checkpoints" / "best" / checkpoint::kSidecarFile)) return p / "checkpoints" / "best";
  throw ValidationError("no checkpoint found at " + p.string());
}

// --- phantoms ---------------------------------------------------------------

struct PhantomFlags {
  std::size_t n = 64;
  int size = 64;
  std::uint64_t seed = 0;
  std::string mix = "0.25,0.25,0.25,0.25";
  std::string out = "phantoms";
  std::optional<std::string> split;
};

int cmd_phantoms(const PhantomFlags& f, std::ostream& out) {
  const auto mix = parse_mix(f.mix);
  dataset::Manifest m = dataset::generate_phantoms(f.n, f.size, f.seed, mix, f.out);
  if (f.split) m = dataset::split_manifest(m, dataset::parse_fractions(*f.split), f.seed);
  const fs::path path = fs::path(f.out) / "manifest.json";
  dataset::save_manifest(m, path);
  json counts = json::object();
  for (Label l : kClassOrder) {
    counts[std::string(to_string(l))] =
        std::count_if(m.records.begin(), m.records.end(), [l](const dataset::CaseRecord& r) { return r.label == l; });
  }
  out << json{{"manifest", path.generic_string()}, {"records", m.records.size()}, {"per_class", counts},
              {"train", m.count(Split::train)}, {"val", m.count(Split::val)}, {"test", m.count(Split::test)}}
             .dump(2)
      << '\n';
  return kExitOk;
}

// --- prepare ----------------------------------------------------------------

struct PrepareFlags {
  std::string root;
  std::string split = "0.7,0.15,0.15";
  std::uint64_t seed = 0;
  std::optional<std::string> labels;
  std::string source;
  std::optional<std::string> out;
};

int cmd_prepare(const PrepareFlags& f, std::ostream& out, std::ostream& err) {
  const dataset::SplitFractions fractions = dataset::parse_fractions(f.split);
  const dataset::LabelRule rule = f.labels ? dataset::parse_label_rule(*f.labels) : dataset::default_label_rule();
  dataset::IngestResult ingest = dataset::ingest_directory(f.root, rule, f.source);
  for (const auto& issue : ingest.issues) err << "skipped " << issue.path.string() << ": " << issue.message << '\n';
  const dataset::Manifest m = dataset::split_manifest(ingest.manifest, fractions, f.seed);
  const fs::path path = f.out ? fs::path(*f.out) : fs::path(f.root) / "manifest.json";
  dataset::save_manifest(m, path);
  out << json{{"manifest", path.generic_string()}, {"records", m.records.size()}, {"issues", ingest.issues.size()},
              {"train", m.count(Split::train)}, {"val", m.count(Split::val)}, {"test", m.count(Split::test)}}
             .dump(2)
      << '\n';
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainFlags {
  std::optional<std::string> task, preset, config, manifest, run_dir;
  std::optional<int> epochs, batch_size, lr_patience, early_stop_patience;
  std::optional<double> learning_rate, weight_decay, dropout, lr_factor, w_bce, w_dice;
  std::optional<std::string> early_stop_metric, loss;
  std::optional<std::uint64_t> seed;
  bool augment = false, no_augment = false;
  std::optional<double> max_rotation;
  // model
  std::optional<int> input_size;
  std::optional<std::string> backbone, backbone_weights;
  bool unfreeze = false;
  std::optional<int> hidden_units;
  std::optional<int> depth, base_filters, bottleneck_filters, residual_blocks, filter_size;
  bool no_batch_norm = false;
  std::optional<double> threshold;
  bool print_config = false;
};

struct ResolvedTrain {
  training::TrainConfig cfg;
  json model_spec;
  std::optional<std::string> manifest;
  fs::path run_dir;
};

ResolvedTrain resolve_train(const TrainFlags& f) {
  const json file = f.config ? read_json_file(*f.config) : json::object();
  const json file_train = section(file, "train");

  const auto task_name = f.task ? f.task : file_value<std::string>(file_train, "task");
  if (!task_name) throw ValidationError("--task is required (classification or segmentation)");
  const training::Task task = training::task_from_string(*task_name);
  const std::string preset = f.preset.value_or(file_value<std::string>(file_train, "preset").value_or("paper"));

  ResolvedTrain r;
  training::TrainConfig cfg = training::TrainConfig::preset_for(task, preset);
  json train_j = file_train;
  train_j["task"] = *task_name;
  train_j["preset"] = preset;
  cfg = training::config_from_json(train_j, cfg);

  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.learning_rate) cfg.learning_rate = *f.learning_rate;
  if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
  if (f.dropout) cfg.dropout_rate = *f.dropout;
  if (f.lr_factor) cfg.lr_factor = *f.lr_factor;
  if (f.lr_patience) cfg.lr_patience = *f.lr_patience;
  if (f.early_stop_metric) cfg.early_stop_metric = training::stop_metric_from_string(*f.early_stop_metric);
  if (f.early_stop_patience) cfg.early_stop_patience = *f.early_stop_patience;
  if (f.seed) cfg.seed = *f.seed;
  if (f.loss) cfg.loss = training::loss_from_string(*f.loss);
  if (f.w_bce) cfg.w_bce = *f.w_bce;
  if (f.w_dice) cfg.w_dice = *f.w_dice;
  if (f.augment) cfg.augment = true;
  if (f.no_augment) cfg.augment = false;
  if (f.max_rotation) cfg.augmentation.max_rotation_deg = *f.max_rotation;
  cfg.validate();
  r.cfg = cfg;

  if (task == training::Task::classification) {
    json spec = classifier::to_json(classifier::ClassifierSpec{});
    spec.update(section(file, "classifier"));
    if (f.backbone) spec["backbone"] = *f.backbone;
    if (f.backbone_weights) spec["backbone_weights"] = *f.backbone_weights;
    if (f.unfreeze) spec["freeze_backbone"] = false;
    if (f.hidden_units) spec["hidden_units"] = *f.hidden_units;
    if (f.input_size) spec["input_size"] = {*f.input_size, *f.input_size};
    spec["dropout_rate"] = cfg.dropout_rate;
    r.model_spec = classifier::to_json(classifier::spec_from_json(spec));
  } else {
    const json file_seg = section(file, "segmenter");
    json spec = segmenter::to_json(segmenter::SegmenterSpec{});
    spec.update(file_seg);
    if (f.depth) spec["depth"] = *f.depth;
    if (f.base_filters) spec["base_filters"] = *f.base_filters;
    if (f.depth || f.base_filters) {
      // Keep the doubling rule and two bottleneck blocks unless stated otherwise.
      if (!f.bottleneck_filters && !file_seg.contains("bottleneck_filters")) spec.erase("bottleneck_filters");
      if (!f.residual_blocks && !file_seg.contains("residual_blocks")) {
        spec["residual_blocks"] = 2 * spec.at("depth").get<int>() + 2;
      }
    }
    if (f.bottleneck_filters) spec["bottleneck_filters"] = *f.bottleneck_filters;
    if (f.residual_blocks) spec["residual_blocks"] = *f.residual_blocks;
    if (f.filter_size) spec["filter_size"] = *f.filter_size;
    if (f.no_batch_norm) spec["use_batch_norm"] = false;
    if (f.input_size) spec["input_size"] = {*f.input_size, *f.input_size};
    if (f.threshold) spec["threshold"] = *f.threshold;
    r.model_spec = segmenter::to_json(segmenter::spec_from_json(spec));
  }

  r.manifest = f.manifest ? f.manifest : file_value<std::string>(file, "manifest");
  std::optional<fs::path> run_flag;
  if (f.run_dir) {
    run_flag = *f.run_dir;
  } else if (auto from_file = file_value<std::string>(file, "run_dir")) {
    run_flag = *from_file;
  }
  r.run_dir = training::resolve_run_dir(run_flag);
  return r;
}

json resolved_json(const ResolvedTrain& r) {
  json j = {{"command", "train"},
            {"run_dir", r.run_dir.generic_string()},
            {"manifest", r.manifest ? json(*r.manifest) : json(nullptr)},
            {"train", training::to_json(r.cfg)}};
  j[r.cfg.task == training::Task::classification ? "classifier" : "segmenter"] = r.model_spec;
  return j;
}

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const ResolvedTrain r = resolve_train(f);
  if (f.print_config) {
    out << resolved_json(r).dump(2) << '\n';
    return kExitOk;
  }
  if (!r.manifest) throw ValidationError("--manifest is required");
  if (!fs::exists(*r.manifest)) throw ValidationError("manifest not found: " + *r.manifest);
  const dataset::Manifest manifest = dataset::load_manifest(*r.manifest);

  std::unique_ptr<nn::Model> model;
  if (r.cfg.task == training::Task::classification) {
    model = classifier::build_classifier(classifier::spec_from_json(r.model_spec), r.cfg.seed);
  } else {
    model = segmenter::build_segmenter(segmenter::spec_from_json(r.model_spec), r.cfg.seed);
  }
  training::TrainOptions opts;
  opts.run_dir = r.run_dir;
  opts.run_config = resolved_json(r);
  opts.run_config.erase("train");
  const bool cls = r.cfg.task == training::Task::classification;
  opts.on_epoch = [&err, cls](const training::EpochRecord& e) {
    err << "epoch " << e.epoch << "  lr " << e.learning_rate << "  train_loss " << e.train_loss << "  val_loss "
        << e.val_loss << (cls ? "  val_accuracy " : "  val_dice ") << e.val_metric << (e.improved ? "  *" : "")
        << '\n';
  };
  const training::TrainResult res = training::train(*model, manifest, r.cfg, opts);
  out << json{{"run_dir", r.run_dir.generic_string()},
              {"checkpoint", res.checkpoint_dir.generic_string()},
              {"epochs_run", res.state.history.size()},
              {"best_epoch", res.state.best_epoch},
              {"best_metric", res.state.best_metric},
              {"stopped_early", res.state.stopped_early},
              {"parameter_checksum", nn::checksum_hex(res.checksum)}}
             .dump(2)
      << '\n';
  return kExitOk;
}

// --- evaluate / predict -----------------------------------------------------

struct ModelFlags {
  std::optional<std::string> classifier, segmenter, config;
  std::optional<double> threshold;
  bool no_gate = false;
};

struct LoadedModels {
  std::unique_ptr<classifier::ClassifierModel> cls;
  std::unique_ptr<segmenter::SegmenterModel> seg;
  fs::path cls_dir, seg_dir;
  double threshold = 0.5;
  bool gate = true;
  json file;
};

LoadedModels load_models(const ModelFlags& f) {
  LoadedModels m;
  m.file = f.config ? read_json_file(*f.config) : json::object();
  const auto cls_path = f.classifier ? f.classifier : file_value<std::string>(m.file, "classifier_checkpoint");
  const auto seg_path = f.segmenter ? f.segmenter : file_value<std::string>(m.file, "segmenter_checkpoint");
  if (!cls_path) throw ValidationError("--classifier checkpoint is required");
  if (!seg_path) throw ValidationError("--segmenter checkpoint is required");
  m.cls_dir = checkpoint_dir(*cls_path);
  m.seg_dir = checkpoint_dir(*seg_path);
  m.cls = checkpoint::load_classifier(m.cls_dir);
  m.seg = checkpoint::load_segmenter(m.seg_dir);
  // Resolutions requested by a config file must match the checkpoints.
  for (const auto& [key, model] : {std::pair<const char*, nn::Model*>{"classifier", m.cls.get()},
                                   std::pair<const char*, nn::Model*>{"segmenter", m.seg.get()}}) {
    const json s = section(m.file, key);
    if (s.contains("input_size")) {
      pipeline::check_resolution(*model, s.at("input_size").at(0).get<int>(), s.at("input_size").at(1).get<int>(),
                                 std::string(key) + " checkpoint");
    }
  }
  const json ev = section(m.file, "evaluate");
  m.threshold = f.threshold.value_or(file_value<double>(ev, "threshold").value_or(m.seg->spec().threshold));
  m.gate = f.no_gate ? false : file_value<bool>(ev, "gate").value_or(true);
  if (!(m.threshold > 0.0 && m.threshold < 1.0)) throw ValidationError("--threshold must lie in (0, 1)");
  return m;
}

struct EvaluateFlags {
  ModelFlags models;
  std::optional<std::string> manifest, split, out;
  bool no_overlays = false;
};

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out) {
  LoadedModels m = load_models(f.models);
  const json ev = section(m.file, "evaluate");
  const auto manifest_path = f.manifest ? f.manifest : file_value<std::string>(m.file, "manifest");
  if (!manifest_path) throw ValidationError("--manifest is required");
  if (!fs::exists(*manifest_path)) throw ValidationError("manifest not found: " + *manifest_path);
  const Split split = split_from_string(f.split.value_or(file_value<std::string>(ev, "split").value_or("test")));
  const fs::path out_dir = f.out ? fs::path(*f.out) : training::resolve_run_dir(std::nullopt) / "evaluation";
  const dataset::Manifest manifest = dataset::load_manifest(*manifest_path);

  pipeline::EvalOptions opts;
  opts.gate = m.gate;
  opts.threshold = m.threshold;
  opts.out_dir = out_dir;
  opts.write_overlays = !f.no_overlays;
  const pipeline::EvaluationReport rep = pipeline::evaluate_suite(*m.cls, *m.seg, manifest, split, opts);
  write_json_file(out_dir / "config.json", {{"command", "evaluate"},
                                            {"classifier_checkpoint", m.cls_dir.generic_string()},
                                            {"segmenter_checkpoint", m.seg_dir.generic_string()},
                                            {"manifest", *manifest_path},
                                            {"split", std::string(to_string(split))},
                                            {"gate", m.gate},
                                            {"threshold", m.threshold},
                                            {"overlays", opts.write_overlays}});
  json summary = {{"report", (out_dir / "report.json").generic_string()},
                  {"cases", rep.cases.size()},
                  {"accuracy", rep.classification.accuracy}};
  if (rep.segmentation) summary["mean_dice"] = rep.segmentation->mean_dice;
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct PredictFlags {
  ModelFlags models;
  std::string image;
  std::optional<std::string> truth, case_id, out_dir, overlay;
};

int cmd_predict(const PredictFlags& f, std::ostream& out) {
  LoadedModels m = load_models(f.models);
  const ImageTensor img = preprocess::normalize(png::read_gray(f.image));
  pipeline::CaseResult r = pipeline::run_case(*m.cls, *m.seg, img, m.gate, m.threshold);
  r.case_id = f.case_id.value_or(fs::path(f.image).stem().string());
  std::optional<SegmentationMask> truth;
  if (f.truth) {
    truth = png::read_mask(*f.truth);
    if (truth->height != img.height || truth->width != img.width) {
      throw ShapeError("--truth mask does not match the image size");
    }
  }
  const fs::path dir = f.out_dir ? fs::path(*f.out_dir) : training::resolve_run_dir(std::nullopt) / "predict";
  if (r.mask) {
    fs::create_directories(dir);
    const fs::path mask_path = dir / (fs::path(r.case_id).filename().string() + "_mask.png");
    png::write_mask(mask_path, *r.mask);
    r.mask_ref = mask_path;
    if (truth) r.seg_scores = metrics::seg_scores(*r.mask, *truth);
  }
  if (f.overlay) {
    pipeline::write_overlay(*f.overlay, img, r.mask ? *r.mask : SegmentationMask(img.height, img.width), truth);
    r.overlay_ref = *f.overlay;
  }
  out << r.to_json().dump(2) << '\n';
  return kExitOk;
}

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--classifier", f.classifier, "Classifier checkpoint (or run) directory");
  sub->add_option("--segmenter", f.segmenter, "Segmenter checkpoint (or run) directory");
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--threshold", f.threshold, "Mask threshold in (0,1); default from the segmenter checkpoint");
  sub->add_flag("--no-gate", f.no_gate, "Segment every case regardless of the predicted class");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"neuroscan: brain MRI tumor classification and segmentation", "neuroscan"};
  app.require_subcommand(1);

  PhantomFlags ph;
  auto* phantoms = app.add_subcommand("phantoms", "Generate a synthetic phantom dataset and its manifest");
  phantoms->add_option("--n", ph.n, "Number of images")->capture_default_str();
  phantoms->add_option("--size", ph.size, "Image side in pixels")->capture_default_str();
  phantoms->add_option("--seed", ph.seed, "Random seed")->capture_default_str();
  phantoms->add_option("--mix", ph.mix, "Class proportions meningioma,glioma,pituitary,no_tumor")->capture_default_str();
  phantoms->add_option("--out", ph.out, "Output directory")->capture_default_str();
  phantoms->add_option("--split", ph.split, "Optional train,val,test fractions");

  PrepareFlags pr;
  auto* prepare = app.add_subcommand("prepare", "Ingest an image directory into a split manifest");
  prepare->add_option("--root", pr.root, "Dataset root with one subdirectory per class")->required();
  prepare->add_option("--split", pr.split, "train,val,test fractions")->capture_default_str();
  prepare->add_option("--seed", pr.seed, "Split seed")->capture_default_str();
  prepare->add_option("--labels", pr.labels, "Subdirectory-to-label rule, e.g. tumor_a=glioma,none=no_tumor");
  prepare->add_option("--source", pr.source, "Provenance tag stored on every record");
  prepare->add_option("--out", pr.out, "Manifest path (default <root>/manifest.json)");

  TrainFlags tr;
  auto* train = app.add_subcommand("train", "Train the classifier or the segmenter");
  train->add_option("--task", tr.task, "classification or segmentation");
  train->add_option("--preset", tr.preset, "Hyperparameter bundle: paper (default) or desk");
  train->add_option("--config", tr.config, "JSON config file");
  train->add_option("--manifest", tr.manifest, "Split manifest");
  train->add_option("--run-dir", tr.run_dir, "Output directory (default $NEUROSCAN_RUN_DIR or runs/latest)");
  train->add_option("--epochs", tr.epochs);
  train->add_option("--batch-size", tr.batch_size);
  train->add_option("--lr", tr.learning_rate, "Initial learning rate");
  train->add_option("--weight-decay", tr.weight_decay);
  train->add_option("--dropout", tr.dropout);
  train->add_option("--lr-factor", tr.lr_factor);
  train->add_option("--lr-patience", tr.lr_patience);
  train->add_option("--early-stop-metric", tr.early_stop_metric, "val_accuracy or val_loss");
  train->add_option("--early-stop-patience", tr.early_stop_patience);
  train->add_option("--seed", tr.seed);
  train->add_option("--loss", tr.loss, "cce, bce, dice or bce_dice");
  train->add_option("--w-bce", tr.w_bce);
  train->add_option("--w-dice", tr.w_dice);
  train->add_flag("--augment", tr.augment, "Enable training augmentation");
  train->add_flag("--no-augment", tr.no_augment, "Disable training augmentation");
  train->add_option("--max-rotation", tr.max_rotation, "Augmentation rotation bound in degrees");
  train->add_option("--input-size", tr.input_size, "Square model input side");
  train->add_option("--backbone", tr.backbone, "tiny_cnn or pretrained_b1");
  train->add_option("--backbone-weights", tr.backbone_weights, "Tensor archive with backbone weights");
  train->add_flag("--unfreeze", tr.unfreeze, "Train the backbone too (tiny_cnn only)");
  train->add_option("--hidden-units", tr.hidden_units);
  train->add_option("--depth", tr.depth);
  train->add_option("--base-filters", tr.base_filters);
  train->add_option("--bottleneck-filters", tr.bottleneck_filters);
  train->add_option("--residual-blocks", tr.residual_blocks);
  train->add_option("--filter-size", tr.filter_size);
  train->add_flag("--no-batch-norm", tr.no_batch_norm);
  train->add_option("--threshold", tr.threshold, "Default mask threshold stored with the segmenter");
  train->add_flag("--print-config", tr.print_config, "Print the resolved configuration and exit");

  EvaluateFlags ev;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate both models on a manifest split");
  add_model_flags(evaluate, ev.models);
  evaluate->add_option("--manifest", ev.manifest, "Split manifest");
  evaluate->add_option("--split", ev.split, "train, val or test (default test)");
  evaluate->add_option("--out", ev.out, "Report directory (default <run dir>/evaluation)");
  evaluate->add_flag("--no-overlays", ev.no_overlays, "Skip overlay rendering");

  PredictFlags pd;
  auto* predict = app.add_subcommand("predict", "Classify and segment one image");
  add_model_flags(predict, pd.models);
  predict->add_option("--image", pd.image, "PNG image")->required();
  predict->add_option("--truth", pd.truth, "Optional ground-truth mask PNG");
  predict->add_option("--case-id", pd.case_id, "Identifier in the output (default image stem)");
  predict->add_option("--out-dir", pd.out_dir, "Where the predicted mask is written (default <run dir>/predict)");
  predict->add_option("--overlay", pd.overlay, "Write an overlay PNG here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*phantoms) return cmd_phantoms(ph, out);
    if (*prepare) return cmd_prepare(pr, out, err);
    if (*train) return cmd_train(tr, out, err);
    if (*evaluate) return cmd_evaluate(ev, out);
    if (*predict) return cmd_predict(pd, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace neuroscan::cli
