#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroscan/image.hpp"
#include "neuroscan/labels.hpp"
#include "neuroscan/nn/model.hpp"

namespace neuroscan::classifier {

enum class BackboneKind { pretrained_b1, tiny_cnn };

std::string_view to_string(BackboneKind kind);
/// Throws ValidationError for unknown names.
BackboneKind backbone_from_string(std::string_view name);

struct ClassifierSpec {
  BackboneKind backbone = BackboneKind::tiny_cnn;
  bool freeze_backbone = true;
  int hidden_units = 512;
  int num_classes = 4;
  double dropout_rate = 0.4;
  int input_height = 224;
  int input_width = 224;
  /// Optional tensor archive with backbone weights. Required for pretrained_b1.
  std::optional<std::filesystem::path> backbone_weights;

  void validate() const;
  bool operator==(const ClassifierSpec&) const = default;
};

nlohmann::json to_json(const ClassifierSpec& spec);
ClassifierSpec spec_from_json(const nlohmann::json& j);

/// Feature extractor in front of the classification head.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual nn::Tensor forward(const nn::Tensor& x, nn::Mode mode) = 0;
  virtual nn::Tensor backward(const nn::Tensor& grad) = 0;
  virtual void collect(std::vector<nn::Parameter*>& out) = 0;
  virtual int in_channels() const = 0;
  virtual int out_channels() const = 0;
  virtual bool supports_training() const = 0;
  virtual std::string name() const = 0;
};

/// Small from-scratch convolutional backbone: three 3x3 conv+ReLU stages with
/// 2x2 pooling between them, 1 input channel, 64 output channels.
class TinyCnn final : public Backbone {
 public:
  explicit TinyCnn(Rng& rng);
  nn::Tensor forward(const nn::Tensor& x, nn::Mode mode) override;
  nn::Tensor backward(const nn::Tensor& grad) override;
  void collect(std::vector<nn::Parameter*>& out) override;
  int in_channels() const override { return 1; }
  int out_channels() const override { return 64; }
  bool supports_training() const override { return true; }
  std::string name() const override { return "tiny_cnn"; }

 private:
  nn::Conv2d conv1_, conv2_, conv3_;
  nn::ReLU relu1_, relu2_, relu3_;
  nn::MaxPool2x2 pool1_, pool2_;
};

/// Backbone -> global average pooling -> Dense(hidden) -> ReLU -> Dropout ->
/// Dense(num_classes) -> softmax.
class ClassifierModel final : public nn::Model {
 public:
  ClassifierModel(const ClassifierSpec& spec, std::unique_ptr<Backbone> backbone, std::uint64_t seed);

  nn::Tensor forward(const nn::Tensor& x, nn::Mode mode) override;
  void backward(const nn::Tensor& grad_probs) override;
  std::vector<nn::Parameter*> parameters() override;
  void reseed(std::uint64_t seed) override { dropout_.reseed(seed); }
  nlohmann::json describe() const override;
  std::string task() const override { return "classification"; }
  int input_height() const override { return spec_.input_height; }
  int input_width() const override { return spec_.input_width; }

  const ClassifierSpec& spec() const { return spec_; }
  Backbone& backbone() { return *backbone_; }
  std::vector<nn::Parameter*> backbone_parameters();
  std::vector<nn::Parameter*> head_parameters();
  /// Widths of the dense layers in order: {hidden_units, num_classes}.
  std::array<int, 2> head_widths() const { return {hidden_.out_features(), output_.out_features()}; }
  nn::Dense& output_layer() { return output_; }

 private:
  nn::Tensor to_backbone_channels(const nn::Tensor& x) const;

  ClassifierSpec spec_;
  std::unique_ptr<Backbone> backbone_;
  nn::GlobalAvgPool pool_;
  nn::Dense hidden_;
  nn::ReLU relu_;
  nn::Dropout dropout_;
  nn::Dense output_;
  nn::Tensor probs_;
  bool backbone_trained_ = false;
};

/// Builds the network; the head and (for tiny_cnn) the backbone are
/// initialised from `seed`. With freeze_backbone every backbone tensor is
/// excluded from the trainable set. Throws ValidationError for invalid specs,
/// e.g. pretrained_b1 without weights.
std::unique_ptr<ClassifierModel> build_classifier(const ClassifierSpec& spec, std::uint64_t seed = 0);

struct ClassProbabilities {
  std::array<double, kNumClasses> probs{};

  Label argmax() const;
  double of(Label l) const { return probs[index_of(l)]; }
};

/// Single-image inference (dropout disabled). The image must already be at
/// the model's input resolution; otherwise ShapeError.
ClassProbabilities predict_class(ClassifierModel& model, const ImageTensor& img);

}  // namespace neuroscan::classifier
