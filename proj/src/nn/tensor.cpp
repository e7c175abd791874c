#include "neuroscan/nn/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "neuroscan/error.hpp"

namespace neuroscan::nn {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

void Tensor::fill(float v) { std::fill(data.begin(), data.end(), v); }

void expect_shape(const Tensor& t, const Shape& s, const char* what) {
  if (!(t.shape == s)) {
    throw ShapeError(std::string(what) + ": expected shape " + s.str() + ", got " + t.shape.str());
  }
}

void Parameter::zero_grad() { grad.fill(0.0F); }

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t checksum(std::span<Parameter* const> params) {
  std::uint64_t h = kFnvOffset;
  for (const Parameter* p : params) {
    fnv(h, p->name.data(), p->name.size());
    const int dims[4] = {p->value.shape.n, p->value.shape.c, p->value.shape.h, p->value.shape.w};
    fnv(h, dims, sizeof(dims));
    fnv(h, p->value.data.data(), p->value.data.size() * sizeof(float));
  }
  return h;
}

std::string checksum_hex(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

}  // namespace neuroscan::nn
