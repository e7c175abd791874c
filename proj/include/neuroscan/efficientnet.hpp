#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "neuroscan/classifier.hpp"
#include "neuroscan/nn/archive.hpp"

namespace neuroscan::efficientnet {

/// One MBConv stage of the B1 variant after depth scaling.
struct StageConfig {
  int kernel;
  int repeats;
  int filters_in;
  int filters_out;
  int expand_ratio;
  int stride;
};

/// The seven stages of EfficientNet-B1 (width 1.0, depth 1.1).
const std::vector<StageConfig>& b1_stages();

/// Frozen, inference-only EfficientNet-B1 feature extractor (no top). Tensor
/// names follow the Keras layer names ("stem_conv.weight",
/// "block2a_expand_bn.gamma", ...). The input is a 3-channel [0,1] image; the
/// archive's "preprocess.mean", "preprocess.variance" and "preprocess.scale"
/// tensors reproduce the reference input normalization. Output has 1280
/// channels at 1/32 resolution.
class EfficientNetB1 final : public classifier::Backbone {
 public:
  EfficientNetB1();
  ~EfficientNetB1() override;

  nn::Tensor forward(const nn::Tensor& x, nn::Mode mode) override;
  nn::Tensor backward(const nn::Tensor& grad) override;
  void collect(std::vector<nn::Parameter*>& out) override;
  int in_channels() const override { return 3; }
  int out_channels() const override { return 1280; }
  bool supports_training() const override { return false; }
  std::string name() const override { return "pretrained_b1"; }

  /// Fills every tensor with random values (for tests without real weights).
  void init_random(std::uint64_t seed);
  std::size_t block_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Builds the backbone and loads every tensor from the archive.
std::unique_ptr<classifier::Backbone> make_b1_backbone(const nn::TensorMap& weights);

}  // namespace neuroscan::efficientnet
