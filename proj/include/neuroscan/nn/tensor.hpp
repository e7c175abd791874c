#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace neuroscan::nn {

/// NCHW shape. Dense activations use (N, F, 1, 1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0F) : shape(s), data(s.numel(), fill) {}

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x;
  }
  float& at(int n, int c, int y, int x) { return data[offset(n, c, y, x)]; }
  float at(int n, int c, int y, int x) const { return data[offset(n, c, y, x)]; }

  /// Contiguous view of sample n.
  std::span<float> sample(int n) {
    const std::size_t sz = static_cast<std::size_t>(shape.c) * shape.plane();
    return {data.data() + sz * n, sz};
  }
  std::span<const float> sample(int n) const {
    const std::size_t sz = static_cast<std::size_t>(shape.c) * shape.plane();
    return {data.data() + sz * n, sz};
  }

  void fill(float v);
};

/// Throws ShapeError with `what` in the message when shapes differ.
void expect_shape(const Tensor& t, const Shape& s, const char* what);

/// Trainable weights or persistent buffers (batch-norm statistics).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool buffer = false;  // persisted but never optimized

  Parameter() = default;
  Parameter(std::string n, Shape s, bool is_buffer = false)
      : name(std::move(n)), value(s), grad(is_buffer ? Tensor{} : Tensor(s)), trainable(!is_buffer), buffer(is_buffer) {}

  void zero_grad();
};

/// Stable 64-bit FNV-1a over names, shapes and raw float bytes.
std::uint64_t checksum(std::span<Parameter* const> params);
std::string checksum_hex(std::uint64_t value);

}  // namespace neuroscan::nn
