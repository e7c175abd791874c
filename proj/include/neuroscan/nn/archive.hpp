#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neuroscan/nn/tensor.hpp"

namespace neuroscan::nn {

/// Named tensors in a flat little-endian binary file:
///   "NSTENSR1" | u32 count | { u32 name_len | name | i32 n,c,h,w | f32 data[] }*
using TensorMap = std::map<std::string, Tensor>;

void write_tensors(const std::filesystem::path& path, const std::vector<const Parameter*>& params);
TensorMap read_tensors(const std::filesystem::path& path);

/// Copies every parameter's value from the archive. Missing names or shape
/// mismatches throw ValidationError naming the offending tensor.
void load_into(const TensorMap& archive, const std::vector<Parameter*>& params);

}  // namespace neuroscan::nn
