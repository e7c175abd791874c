#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "neuroscan/nn/tensor.hpp"
#include "neuroscan/rng.hpp"

namespace neuroscan::nn {

enum class Mode { train, infer };

/// A differentiable operator with an explicit backward pass. forward() in
/// train mode caches whatever backward() needs; infer mode caches nothing.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(std::vector<Parameter*>& out) { (void)out; }
  virtual std::string kind() const = 0;
};

struct Padding {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  /// Symmetric "same" padding for odd kernels at stride 1.
  static Padding same(int kernel) { return {kernel / 2, kernel / 2, kernel / 2, kernel / 2}; }
};

/// 2-D convolution via im2col + GEMM. Weight layout (out, in, k, k).
class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride = 1,
         Padding pad = {}, bool bias = true);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<Parameter*>& out) override;
  std::string kind() const override { return "conv2d"; }

  /// He-normal weights, zero bias.
  void init(Rng& rng);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }
  void set_padding(Padding pad) { pad_ = pad; }
  Shape output_shape(const Shape& in) const;

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_, k_, stride_;
  Padding pad_;
  bool has_bias_;
  Tensor cached_input_;
};

/// Depthwise convolution (one filter per channel, no bias). Inference only;
/// used by frozen pretrained backbones.
class DepthwiseConv2d final : public Layer {
 public:
  DepthwiseConv2d(std::string name, int channels, int kernel, int stride, Padding pad);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<Parameter*>& out) override;
  std::string kind() const override { return "depthwise_conv2d"; }
  void set_padding(Padding pad) { pad_ = pad; }

  Parameter weight;  // (channels, 1, k, k)

 private:
  int channels_, k_, stride_;
  Padding pad_;
};

/// 2x2 stride-2 transposed convolution. Weight layout (in, out, 2, 2).
class ConvTranspose2x2 final : public Layer {
 public:
  ConvTranspose2x2(std::string name, int in_channels, int out_channels);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<Parameter*>& out) override;
  std::string kind() const override { return "conv_transpose2x2"; }
  void init(Rng& rng);

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_;
  Tensor cached_input_;
};

/// Per-channel batch normalization. Train mode uses batch statistics and
/// updates the running estimates: running = momentum*running + (1-momentum)*batch.
class BatchNorm2d final : public Layer {
 public:
  BatchNorm2d(std::string name, int channels, float eps = 1e-3F, float momentum = 0.9F);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<Parameter*>& out) override;
  std::string kind() const override { return "batch_norm"; }

  Parameter gamma;
  Parameter beta;
  Parameter running_mean;
  Parameter running_var;

 private:
  int channels_;
  float eps_, momentum_;
  Tensor cached_xhat_;
  std::vector<float> cached_inv_std_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor cached_output_;
};

/// 2x2 max pooling with stride 2 (odd trailing rows/columns are dropped).
class MaxPool2x2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "max_pool2x2"; }

 private:
  Shape in_shape_;
  std::vector<std::uint32_t> argmax_;
};

/// (N, C, H, W) -> (N, C, 1, 1) spatial mean.
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "global_avg_pool"; }

 private:
  Shape in_shape_;
};

/// Fully connected layer on (N, F, 1, 1). Weight layout (out, in).
class Dense final : public Layer {
 public:
  Dense(std::string name, int in_features, int out_features);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(std::vector<Parameter*>& out) override;
  std::string kind() const override { return "dense"; }
  /// Glorot-uniform weights, zero bias.
  void init(Rng& rng);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_;
  Tensor cached_input_;
};

/// Inverted dropout: train mode zeroes units with probability `rate` and
/// scales survivors by 1/(1-rate); infer mode is the identity.
class Dropout final : public Layer {
 public:
  explicit Dropout(float rate, std::uint64_t seed = 0) : rate_(rate), rng_(seed) {}

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "dropout"; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  float rate() const { return rate_; }

 private:
  float rate_;
  Rng rng_;
  std::vector<float> keep_;
};

// Elementwise helpers shared by the models.
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
/// Channel concatenation [a, b].
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a gradient of concat_channels back into the two inputs.
void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb);

/// Row-wise softmax over channels of (N, C, 1, 1).
Tensor softmax(const Tensor& logits);
/// Given p = softmax(z) and dL/dp, returns dL/dz.
Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs);
Tensor sigmoid(const Tensor& logits);
Tensor sigmoid_backward(const Tensor& probs, const Tensor& grad_probs);

}  // namespace neuroscan::nn
