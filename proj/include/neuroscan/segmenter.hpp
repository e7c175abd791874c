#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "neuroscan/image.hpp"
#include "neuroscan/nn/model.hpp"

namespace neuroscan::segmenter {

struct SegmenterSpec {
  int depth = 4;                  // encoder levels (= pooling steps)
  int base_filters = 64;          // channels at full resolution, doubled per level
  int bottleneck_filters = 1024;  // must equal base_filters * 2^depth
  int filter_size = 3;
  int residual_blocks = 10;       // encoder + bottleneck + decoder blocks
  bool use_batch_norm = true;
  int input_height = 256;
  int input_width = 256;
  double threshold = 0.5;  // default binarization threshold stored with checkpoints

  /// Narrow variant with the same topology rules: bottleneck and block count
  /// derived from depth and base width (two bottleneck blocks).
  static SegmenterSpec reduced(int depth, int base_filters, int input_size);

  int bottleneck_blocks() const { return residual_blocks - 2 * depth; }
  void validate() const;
  bool operator==(const SegmenterSpec&) const = default;
};

nlohmann::json to_json(const SegmenterSpec& spec);
SegmenterSpec spec_from_json(const nlohmann::json& j);

/// Layer inventory of a built network.
struct ArchitectureAudit {
  int conv_layers = 0;           // k x k convolutions plus the 1-filter output conv
  int residual_blocks = 0;
  int shortcut_projections = 0;  // 1x1 convs on residual shortcuts where channels change
  int up_convolutions = 0;       // 2x2 transposed convolutions
  int batch_norm_layers = 0;
  int skip_connections = 0;
  int bottleneck_channels = 0;
  std::vector<int> encoder_channels;

  nlohmann::json to_json() const;
};

/// conv -> BN -> ReLU -> conv -> BN, plus the identity (or 1x1-projected)
/// input, then ReLU.
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int in_channels, int out_channels, int kernel, bool batch_norm, Rng& rng);

  nn::Tensor forward(const nn::Tensor& x, nn::Mode mode);
  nn::Tensor backward(const nn::Tensor& grad);
  void collect(std::vector<nn::Parameter*>& out);
  bool has_projection() const { return projection_ != nullptr; }

 private:
  nn::Conv2d conv1_, conv2_;
  std::unique_ptr<nn::BatchNorm2d> bn1_, bn2_;
  std::unique_ptr<nn::Conv2d> projection_;
  nn::ReLU relu1_, relu_out_;
};

/// Residual U-Net: stem conv, `depth` encoder levels (one residual block
/// each, 2x2 max pooling between levels), a bottleneck entry conv plus
/// residual blocks at `bottleneck_filters` channels, `depth` decoder levels
/// (2x2 transposed conv, concatenation with the matching encoder output, one
/// residual block) and a 1x1 single-filter output conv with sigmoid.
class SegmenterModel final : public nn::Model {
 public:
  SegmenterModel(const SegmenterSpec& spec, std::uint64_t seed);
  ~SegmenterModel() override;

  nn::Tensor forward(const nn::Tensor& x, nn::Mode mode) override;
  void backward(const nn::Tensor& grad_probs) override;
  std::vector<nn::Parameter*> parameters() override;
  nlohmann::json describe() const override;
  std::string task() const override { return "segmentation"; }
  int input_height() const override { return spec_.input_height; }
  int input_width() const override { return spec_.input_width; }

  const SegmenterSpec& spec() const { return spec_; }
  const ArchitectureAudit& audit() const { return audit_; }

  /// Replaces the encoder feature map fed to decoder `level` with zeros.
  void set_skip_ablated(int level, bool ablated);

 private:
  struct Layers;
  SegmenterSpec spec_;
  std::unique_ptr<Layers> layers_;
  ArchitectureAudit audit_;
};

/// Throws ValidationError for inconsistent specs (including input sizes not
/// divisible by 2^depth).
std::unique_ptr<SegmenterModel> build_segmenter(const SegmenterSpec& spec, std::uint64_t seed = 0);

/// Sigmoid probability map for one image at the model resolution.
ImageTensor predict_probabilities(SegmenterModel& model, const ImageTensor& img);

/// mask = (probability >= threshold). Throws ValidationError unless
/// 0 < threshold < 1 and ShapeError when the image is not at model resolution.
SegmentationMask predict_mask(SegmenterModel& model, const ImageTensor& img, double threshold);
SegmentationMask threshold_map(const ImageTensor& probs, double threshold);

}  // namespace neuroscan::segmenter
