#include "neuroscan/efficientnet.hpp"

#include <cmath>
#include <stdexcept>

#include "neuroscan/error.hpp"
#include "neuroscan/nn/layers.hpp"

namespace neuroscan::efficientnet {
namespace {

constexpr float kBnEps = 1e-3F;

void swish_inplace(nn::Tensor& t) {
  for (float& v : t.data) v = static_cast<float>(v / (1.0 + std::exp(-static_cast<double>(v))));
}

// Keras padding for stride-2 layers on even inputs pads one pixel less at the
// top/left; stride-1 layers use symmetric "same" padding.
nn::Padding pad_for(int kernel, int stride, int in_h, int in_w) {
  if (stride == 1) return nn::Padding::same(kernel);
  const int c = kernel / 2;
  return {c - (1 - in_h % 2), c - (1 - in_w % 2), c, c};
}

}  // namespace

const std::vector<StageConfig>& b1_stages() {
  // Base B0 repeats {1,2,2,3,3,4,1} scaled by ceil(1.1 * r).
  static const std::vector<StageConfig> stages = {
      {3, 2, 32, 16, 1, 1},  {3, 3, 16, 24, 6, 2},  {5, 3, 24, 40, 6, 2},   {3, 4, 40, 80, 6, 2},
      {5, 4, 80, 112, 6, 1}, {5, 5, 112, 192, 6, 2}, {3, 2, 192, 320, 6, 1},
  };
  return stages;
}

struct MbConv {
  std::string prefix;
  int filters_in, filters_out, expanded, kernel, stride;
  std::unique_ptr<nn::Conv2d> expand_conv;
  std::unique_ptr<nn::BatchNorm2d> expand_bn;
  nn::DepthwiseConv2d dwconv;
  nn::BatchNorm2d bn;
  nn::Conv2d se_reduce, se_expand;
  nn::Conv2d project_conv;
  nn::BatchNorm2d project_bn;

  MbConv(const std::string& name, int fin, int fout, int expand_ratio, int k, int s)
      : prefix(name),
        filters_in(fin),
        filters_out(fout),
        expanded(fin * expand_ratio),
        kernel(k),
        stride(s),
        dwconv(name + "dwconv", fin * expand_ratio, k, s, nn::Padding::same(k)),
        bn(name + "bn", fin * expand_ratio, kBnEps),
        se_reduce(name + "se_reduce", fin * expand_ratio, std::max(1, fin / 4), 1),
        se_expand(name + "se_expand", std::max(1, fin / 4), fin * expand_ratio, 1),
        project_conv(name + "project_conv", fin * expand_ratio, fout, 1, 1, {}, false),
        project_bn(name + "project_bn", fout, kBnEps) {
    if (expand_ratio != 1) {
      expand_conv = std::make_unique<nn::Conv2d>(name + "expand_conv", fin, expanded, 1, 1, nn::Padding{}, false);
      expand_bn = std::make_unique<nn::BatchNorm2d>(name + "expand_bn", expanded, kBnEps);
    }
  }

  void collect(std::vector<nn::Parameter*>& out) {
    if (expand_conv) {
      expand_conv->collect(out);
      expand_bn->collect(out);
    }
    dwconv.collect(out);
    bn.collect(out);
    se_reduce.collect(out);
    se_expand.collect(out);
    project_conv.collect(out);
    project_bn.collect(out);
  }

  nn::Tensor forward(const nn::Tensor& input) {
    nn::Tensor x = input;
    if (expand_conv) {
      x = expand_bn->forward(expand_conv->forward(x, nn::Mode::infer), nn::Mode::infer);
      swish_inplace(x);
    }
    dwconv.set_padding(pad_for(kernel, stride, x.shape.h, x.shape.w));
    x = bn.forward(dwconv.forward(x, nn::Mode::infer), nn::Mode::infer);
    swish_inplace(x);

    // squeeze and excitation
    nn::Tensor se({x.shape.n, x.shape.c, 1, 1});
    const std::size_t hw = x.shape.plane();
    for (int n = 0; n < x.shape.n; ++n) {
      for (int c = 0; c < x.shape.c; ++c) {
        const float* src = x.data.data() + x.offset(n, c, 0, 0);
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += src[i];
        se.at(n, c, 0, 0) = static_cast<float>(s / static_cast<double>(hw));
      }
    }
    se = se_reduce.forward(se, nn::Mode::infer);
    swish_inplace(se);
    se = nn::sigmoid(se_expand.forward(se, nn::Mode::infer));
    for (int n = 0; n < x.shape.n; ++n) {
      for (int c = 0; c < x.shape.c; ++c) {
        const float g = se.at(n, c, 0, 0);
        float* dst = x.data.data() + x.offset(n, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) dst[i] *= g;
      }
    }

    x = project_bn.forward(project_conv.forward(x, nn::Mode::infer), nn::Mode::infer);
    if (stride == 1 && filters_in == filters_out) nn::add_inplace(x, input);
    return x;
  }
};

struct EfficientNetB1::Impl {
  nn::Parameter mean{"preprocess.mean", {3, 1, 1, 1}, true};
  nn::Parameter variance{"preprocess.variance", {3, 1, 1, 1}, true};
  nn::Parameter scale{"preprocess.scale", {3, 1, 1, 1}, true};
  nn::Conv2d stem{"stem_conv", 3, 32, 3, 2, nn::Padding{}, false};
  nn::BatchNorm2d stem_bn{"stem_bn", 32, kBnEps};
  std::vector<std::unique_ptr<MbConv>> blocks;
  nn::Conv2d top_conv{"top_conv", 320, 1280, 1, 1, nn::Padding{}, false};
  nn::BatchNorm2d top_bn{"top_bn", 1280, kBnEps};

  Impl() {
    variance.value.fill(1.0F);
    scale.value.fill(1.0F);
    int stage_index = 0;
    for (const StageConfig& st : b1_stages()) {
      ++stage_index;
      for (int j = 0; j < st.repeats; ++j) {
        const std::string name = "block" + std::to_string(stage_index) + static_cast<char>('a' + j) + "_";
        const int fin = j == 0 ? st.filters_in : st.filters_out;
        blocks.push_back(std::make_unique<MbConv>(name, fin, st.filters_out, st.expand_ratio, st.kernel,
                                                  j == 0 ? st.stride : 1));
      }
    }
  }
};

EfficientNetB1::EfficientNetB1() : impl_(std::make_unique<Impl>()) {
  std::vector<nn::Parameter*> all;
  collect(all);
  for (nn::Parameter* p : all) p->trainable = false;
}

EfficientNetB1::~EfficientNetB1() = default;

std::size_t EfficientNetB1::block_count() const { return impl_->blocks.size(); }

void EfficientNetB1::collect(std::vector<nn::Parameter*>& out) {
  out.push_back(&impl_->mean);
  out.push_back(&impl_->variance);
  out.push_back(&impl_->scale);
  impl_->stem.collect(out);
  impl_->stem_bn.collect(out);
  for (auto& b : impl_->blocks) b->collect(out);
  impl_->top_conv.collect(out);
  impl_->top_bn.collect(out);
}

void EfficientNetB1::init_random(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::Parameter*> all;
  collect(all);
  for (nn::Parameter* p : all) {
    const std::string& n = p->name;
    const auto ends_with = [&](const std::string& suffix) {
      return n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (n.rfind("preprocess.", 0) == 0) continue;
    if (ends_with(".running_var") || ends_with(".gamma")) {
      for (float& v : p->value.data) v = static_cast<float>(rng.uniform(0.5, 1.5));
    } else if (ends_with(".running_mean") || ends_with(".beta") || ends_with(".bias")) {
      for (float& v : p->value.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    } else {
      const auto& s = p->value.shape;
      const double fan_in = static_cast<double>(s.c) * s.h * s.w;
      const double sd = std::sqrt(1.0 / fan_in);
      for (float& v : p->value.data) v = static_cast<float>(rng.normal(0.0, sd));
    }
  }
}

nn::Tensor EfficientNetB1::forward(const nn::Tensor& input, nn::Mode) {
  if (input.shape.c != 3) throw ShapeError("pretrained_b1 expects 3-channel input, got " + input.shape.str());
  if (input.shape.h < 32 || input.shape.w < 32) throw ShapeError("pretrained_b1 needs input of at least 32x32");
  nn::Tensor x = input;
  const std::size_t hw = x.shape.plane();
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < 3; ++c) {
      // [0,1] input corresponds to the reference model's [0,255] input after
      // its 1/255 rescaling.
      const float m = impl_->mean.value.data[static_cast<std::size_t>(c)];
      const float sd = std::max(std::sqrt(impl_->variance.value.data[static_cast<std::size_t>(c)]), 1e-7F);
      const float sc = impl_->scale.value.data[static_cast<std::size_t>(c)];
      float* p = x.data.data() + x.offset(n, c, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) p[i] = (p[i] - m) / sd * sc;
    }
  }
  impl_->stem.set_padding(pad_for(3, 2, x.shape.h, x.shape.w));
  x = impl_->stem_bn.forward(impl_->stem.forward(x, nn::Mode::infer), nn::Mode::infer);
  swish_inplace(x);
  for (auto& b : impl_->blocks) x = b->forward(x);
  x = impl_->top_bn.forward(impl_->top_conv.forward(x, nn::Mode::infer), nn::Mode::infer);
  swish_inplace(x);
  return x;
}

nn::Tensor EfficientNetB1::backward(const nn::Tensor&) {
  throw std::logic_error("pretrained_b1 backbone is frozen and has no backward pass");
}

std::unique_ptr<classifier::Backbone> make_b1_backbone(const nn::TensorMap& weights) {
  auto net = std::make_unique<EfficientNetB1>();
  std::vector<nn::Parameter*> params;
  net->collect(params);
  nn::load_into(weights, params);
  return net;
}

}  // namespace neuroscan::efficientnet
