#include "neuroscan/checkpoint.hpp"

#include <fstream>

#include "neuroscan/error.hpp"
#include "neuroscan/nn/archive.hpp"

namespace neuroscan::checkpoint {

void save(nn::Model& model, const fs::path& dir, const nlohmann::json& extra) {
  fs::create_directories(dir);
  const auto params = model.parameters();
  const std::vector<const nn::Parameter*> cparams(params.begin(), params.end());
  // Write to temporaries first so an interrupted save never leaves a torn pair.
  nn::write_tensors(dir / "params.bin.tmp", cparams);
  nlohmann::json sidecar = {{"format", "neuroscan-checkpoint/1"},
                            {"task", model.task()},
                            {"model", model.describe()},
                            {"input_resolution", {model.input_height(), model.input_width()}},
                            {"parameter_checksum", nn::checksum_hex(model.checksum())},
                            {"trainable_parameters", model.trainable_count()}};
  for (const auto& [k, v] : extra.items()) sidecar[k] = v;
  {
    std::ofstream out(dir / "model.json.tmp");
    out << sidecar.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write checkpoint sidecar in " + dir.string());
  }
  fs::rename(dir / "params.bin.tmp", dir / kParamsFile);
  fs::rename(dir / "model.json.tmp", dir / kSidecarFile);
}

nlohmann::json read_sidecar(const fs::path& dir) {
  const fs::path path = dir / kSidecarFile;
  if (!fs::exists(path) || !fs::exists(dir / kParamsFile)) {
    throw ValidationError("no checkpoint at " + dir.string() + " (expected model.json and params.bin)");
  }
  std::ifstream in(path);
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (!j.contains("task") || !j.contains("model")) throw ValidationError("checkpoint sidecar lacks task/model");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint sidecar " + path.string() + ": " + e.what());
  }
}

namespace {

void load_tensors(nn::Model& model, const fs::path& dir) {
  nn::load_into(nn::read_tensors(dir / kParamsFile), model.parameters());
}

}  // namespace

std::unique_ptr<classifier::ClassifierModel> load_classifier(const fs::path& dir) {
  const nlohmann::json side = read_sidecar(dir);
  if (side.at("task") != "classification") {
    throw ValidationError("checkpoint " + dir.string() + " holds a " + side.at("task").get<std::string>() +
                          " model, expected classification");
  }
  nlohmann::json spec_j = side.at("model").at("spec");
  // The archive carries the backbone tensors as well, so it doubles as the
  // backbone weight file.
  spec_j["backbone_weights"] = (dir / kParamsFile).string();
  auto model = classifier::build_classifier(classifier::spec_from_json(spec_j), 0);
  load_tensors(*model, dir);
  return model;
}

std::unique_ptr<segmenter::SegmenterModel> load_segmenter(const fs::path& dir) {
  const nlohmann::json side = read_sidecar(dir);
  if (side.at("task") != "segmentation") {
    throw ValidationError("checkpoint " + dir.string() + " holds a " + side.at("task").get<std::string>() +
                          " model, expected segmentation");
  }
  auto model = segmenter::build_segmenter(segmenter::spec_from_json(side.at("model").at("spec")), 0);
  load_tensors(*model, dir);
  return model;
}

std::unique_ptr<nn::Model> load(const fs::path& dir) {
  const std::string task = read_sidecar(dir).at("task").get<std::string>();
  if (task == "classification") return load_classifier(dir);
  if (task == "segmentation") return load_segmenter(dir);
  throw ValidationError("checkpoint " + dir.string() + " has unknown task '" + task + "'");
}

}  // namespace neuroscan::checkpoint
