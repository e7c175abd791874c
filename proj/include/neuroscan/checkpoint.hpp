#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "neuroscan/classifier.hpp"
#include "neuroscan/nn/model.hpp"
#include "neuroscan/segmenter.hpp"

namespace neuroscan::checkpoint {

namespace fs = std::filesystem;

inline constexpr const char* kParamsFile = "params.bin";
inline constexpr const char* kSidecarFile = "model.json";

/// Writes every persisted tensor to <dir>/params.bin and a JSON sidecar
/// (<dir>/model.json) holding the model description, input resolution,
/// parameter checksum and whatever `extra` carries (training config hash,
/// epoch, monitored value).
void save(nn::Model& model, const fs::path& dir, const nlohmann::json& extra = nlohmann::json::object());

/// Throws ValidationError when the directory or sidecar is missing or malformed.
nlohmann::json read_sidecar(const fs::path& dir);

/// Rebuilds the network described by the sidecar and loads its tensors.
std::unique_ptr<nn::Model> load(const fs::path& dir);
/// As load(), but additionally requires the stored task to match.
std::unique_ptr<classifier::ClassifierModel> load_classifier(const fs::path& dir);
std::unique_ptr<segmenter::SegmenterModel> load_segmenter(const fs::path& dir);

}  // namespace neuroscan::checkpoint
