#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroscan/nn/layers.hpp"

namespace neuroscan::nn {

/// A network trained by the shared training engine. forward() returns
/// probabilities (softmax rows or a sigmoid map); backward() consumes the loss
/// gradient with respect to those probabilities.
class Model {
 public:
  virtual ~Model() = default;

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual void backward(const Tensor& grad_probs) = 0;

  /// Every persisted tensor, in a stable order (weights and buffers).
  virtual std::vector<Parameter*> parameters() = 0;
  /// Tensors the optimizer may update.
  std::vector<Parameter*> trainable_parameters();
  std::size_t trainable_count();

  virtual void reseed(std::uint64_t seed) { (void)seed; }
  /// Architecture description written next to checkpoints.
  virtual nlohmann::json describe() const = 0;
  virtual std::string task() const = 0;

  virtual int input_height() const = 0;
  virtual int input_width() const = 0;

  void zero_grad();
  std::uint64_t checksum();
};

}  // namespace neuroscan::nn
