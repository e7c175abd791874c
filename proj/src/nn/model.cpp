#include "neuroscan/nn/model.hpp"

namespace neuroscan::nn {

std::vector<Parameter*> Model::trainable_parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : parameters()) {
    if (p->trainable && !p->buffer) out.push_back(p);
  }
  return out;
}

std::size_t Model::trainable_count() {
  std::size_t n = 0;
  for (Parameter* p : trainable_parameters()) n += p->value.numel();
  return n;
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) {
    if (!p->buffer) p->zero_grad();
  }
}

std::uint64_t Model::checksum() {
  const auto params = parameters();
  return nn::checksum(params);
}

}  // namespace neuroscan::nn
