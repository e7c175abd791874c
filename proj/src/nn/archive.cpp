#include "neuroscan/nn/archive.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "neuroscan/error.hpp"

namespace neuroscan::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'N', 'S', 'T', 'E', 'N', 'S', 'R', '1'};

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ValidationError("truncated tensor archive '" + path.string() + "'");
  }
  return v;
}

}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<const Parameter*>& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os.write(kMagic.data(), kMagic.size());
  put(os, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const Shape& s = p->value.shape;
    for (int d : {s.n, s.c, s.h, s.w}) put(os, static_cast<std::int32_t>(d));
    os.write(reinterpret_cast<const char*>(p->value.data.data()),
             static_cast<std::streamsize>(p->value.data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

TensorMap read_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open tensor archive '" + path.string() + "'");
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ValidationError("'" + path.string() + "' is not a tensor archive");
  }
  const auto count = get<std::uint32_t>(is, path);
  TensorMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw ValidationError("corrupt tensor name in '" + path.string() + "'");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ValidationError("truncated tensor archive '" + path.string() + "'");
    Shape s;
    s.n = get<std::int32_t>(is, path);
    s.c = get<std::int32_t>(is, path);
    s.h = get<std::int32_t>(is, path);
    s.w = get<std::int32_t>(is, path);
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw ValidationError("corrupt tensor shape in '" + path.string() + "'");
    Tensor t(s);
    if (!is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)))) {
      throw ValidationError("truncated tensor data for '" + name + "' in '" + path.string() + "'");
    }
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

void load_into(const TensorMap& archive, const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    const auto it = archive.find(p->name);
    if (it == archive.end()) throw ValidationError("checkpoint is missing tensor '" + p->name + "'");
    if (!(it->second.shape == p->value.shape)) {
      throw ValidationError("checkpoint tensor '" + p->name + "' has shape " + it->second.shape.str() +
                            ", model expects " + p->value.shape.str());
    }
    p->value.data = it->second.data;
  }
}

}  // namespace neuroscan::nn
