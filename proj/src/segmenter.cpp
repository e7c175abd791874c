#include "neuroscan/segmenter.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "neuroscan/error.hpp"
#include "neuroscan/nn/batch.hpp"
#include "neuroscan/rng.hpp"

namespace neuroscan::segmenter {

SegmenterSpec SegmenterSpec::reduced(int depth, int base_filters, int input_size) {
  SegmenterSpec s;
  s.depth = depth;
  s.base_filters = base_filters;
  s.bottleneck_filters = base_filters << depth;
  s.residual_blocks = 2 * depth + 2;
  s.input_height = input_size;
  s.input_width = input_size;
  return s;
}

void SegmenterSpec::validate() const {
  if (depth < 1 || depth > 8) throw ValidationError("segmenter depth must lie in [1, 8]");
  if (base_filters < 1) throw ValidationError("base_filters must be positive");
  if (bottleneck_filters != (base_filters << depth)) {
    throw ValidationError("bottleneck_filters must equal base_filters * 2^depth (" +
                          std::to_string(base_filters << depth) + ")");
  }
  if (filter_size < 1 || filter_size % 2 == 0) throw ValidationError("filter_size must be a positive odd number");
  if (bottleneck_blocks() < 1) {
    throw ValidationError("residual_blocks must be at least 2*depth+1 (one per encoder and decoder level plus "
                          "one in the bottleneck)");
  }
  const int factor = 1 << depth;
  if (input_height <= 0 || input_width <= 0 || input_height % factor != 0 || input_width % factor != 0) {
    throw ValidationError("segmenter input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                          " must be divisible by 2^depth = " + std::to_string(factor));
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
}

nlohmann::json to_json(const SegmenterSpec& s) {
  return {{"depth", s.depth},
          {"base_filters", s.base_filters},
          {"bottleneck_filters", s.bottleneck_filters},
          {"filter_size", s.filter_size},
          {"residual_blocks", s.residual_blocks},
          {"use_batch_norm", s.use_batch_norm},
          {"input_size", {s.input_height, s.input_width}},
          {"threshold", s.threshold}};
}

SegmenterSpec spec_from_json(const nlohmann::json& j) {
  SegmenterSpec s;
  try {
    s.depth = j.value("depth", s.depth);
    s.base_filters = j.value("base_filters", s.base_filters);
    s.bottleneck_filters = j.value("bottleneck_filters", s.base_filters << s.depth);
    s.filter_size = j.value("filter_size", s.filter_size);
    s.residual_blocks = j.value("residual_blocks", s.residual_blocks);
    s.use_batch_norm = j.value("use_batch_norm", s.use_batch_norm);
    if (j.contains("input_size")) {
      s.input_height = j.at("input_size").at(0).get<int>();
      s.input_width = j.at("input_size").at(1).get<int>();
    }
    s.threshold = j.value("threshold", s.threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed segmenter spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json ArchitectureAudit::to_json() const {
  return {{"conv_layers", conv_layers},
          {"residual_blocks", residual_blocks},
          {"shortcut_projections", shortcut_projections},
          {"up_convolutions", up_convolutions},
          {"batch_norm_layers", batch_norm_layers},
          {"skip_connections", skip_connections},
          {"bottleneck_channels", bottleneck_channels},
          {"encoder_channels", encoder_channels}};
}

// --- ResidualBlock ----------------------------------------------------------

ResidualBlock::ResidualBlock(const std::string& name, int in_channels, int out_channels, int kernel,
                             bool batch_norm, Rng& rng)
    : conv1_(name + ".conv1", in_channels, out_channels, kernel, 1, nn::Padding::same(kernel), !batch_norm),
      conv2_(name + ".conv2", out_channels, out_channels, kernel, 1, nn::Padding::same(kernel), !batch_norm) {
  conv1_.init(rng);
  conv2_.init(rng);
  if (batch_norm) {
    bn1_ = std::make_unique<nn::BatchNorm2d>(name + ".bn1", out_channels);
    bn2_ = std::make_unique<nn::BatchNorm2d>(name + ".bn2", out_channels);
  }
  if (in_channels != out_channels) {
    projection_ = std::make_unique<nn::Conv2d>(name + ".shortcut", in_channels, out_channels, 1);
    projection_->init(rng);
  }
}

nn::Tensor ResidualBlock::forward(const nn::Tensor& x, nn::Mode mode) {
  nn::Tensor h = conv1_.forward(x, mode);
  if (bn1_) h = bn1_->forward(h, mode);
  h = relu1_.forward(h, mode);
  h = conv2_.forward(h, mode);
  if (bn2_) h = bn2_->forward(h, mode);
  nn::add_inplace(h, projection_ ? projection_->forward(x, mode) : x);
  return relu_out_.forward(h, mode);
}

nn::Tensor ResidualBlock::backward(const nn::Tensor& grad) {
  const nn::Tensor g_sum = relu_out_.backward(grad);
  nn::Tensor g = g_sum;
  if (bn2_) g = bn2_->backward(g);
  g = conv2_.backward(g);
  g = relu1_.backward(g);
  if (bn1_) g = bn1_->backward(g);
  g = conv1_.backward(g);
  nn::add_inplace(g, projection_ ? projection_->backward(g_sum) : g_sum);
  return g;
}

void ResidualBlock::collect(std::vector<nn::Parameter*>& out) {
  conv1_.collect(out);
  if (bn1_) bn1_->collect(out);
  conv2_.collect(out);
  if (bn2_) bn2_->collect(out);
  if (projection_) projection_->collect(out);
}

// --- SegmenterModel ---------------------------------------------------------

struct SegmenterModel::Layers {
  // conv -> (BN) -> ReLU
  struct ConvUnit {
    nn::Conv2d conv;
    std::unique_ptr<nn::BatchNorm2d> bn;
    nn::ReLU relu;

    ConvUnit(const std::string& name, int in, int out, int k, bool batch_norm, Rng& rng)
        : conv(name + ".conv", in, out, k, 1, nn::Padding::same(k), !batch_norm) {
      conv.init(rng);
      if (batch_norm) bn = std::make_unique<nn::BatchNorm2d>(name + ".bn", out);
    }
    nn::Tensor forward(const nn::Tensor& x, nn::Mode mode) {
      nn::Tensor h = conv.forward(x, mode);
      if (bn) h = bn->forward(h, mode);
      return relu.forward(h, mode);
    }
    nn::Tensor backward(const nn::Tensor& g) {
      nn::Tensor h = relu.backward(g);
      if (bn) h = bn->backward(h);
      return conv.backward(h);
    }
    void collect(std::vector<nn::Parameter*>& out) {
      conv.collect(out);
      if (bn) bn->collect(out);
    }
  };

  std::unique_ptr<ConvUnit> stem;
  std::vector<std::unique_ptr<ResidualBlock>> encoder;
  std::vector<nn::MaxPool2x2> pools;  // pools[l] follows encoder level l
  std::unique_ptr<ConvUnit> bottleneck_entry;
  std::vector<std::unique_ptr<ResidualBlock>> bottleneck;
  std::vector<std::unique_ptr<nn::ConvTranspose2x2>> ups;  // ups[l]: level l+1 -> l
  std::vector<std::unique_ptr<ResidualBlock>> decoder;     // decoder[l] at level l
  std::unique_ptr<nn::Conv2d> head;

  std::vector<bool> ablated;
  std::vector<int> skip_channels;
  nn::Tensor probs;
};

SegmenterModel::SegmenterModel(const SegmenterSpec& spec, std::uint64_t seed)
    : spec_(spec), layers_(std::make_unique<Layers>()) {
  spec_.validate();
  Rng rng(derive_seed({seed, 0x5e6ULL}));
  const int k = spec_.filter_size;
  const bool bn = spec_.use_batch_norm;
  auto& L = *layers_;

  std::vector<int> ch(static_cast<std::size_t>(spec_.depth) + 1);
  for (int l = 0; l <= spec_.depth; ++l) ch[static_cast<std::size_t>(l)] = spec_.base_filters << l;

  L.stem = std::make_unique<Layers::ConvUnit>("stem", 1, ch[0], k, bn, rng);
  audit_.conv_layers += 1;
  for (int l = 0; l < spec_.depth; ++l) {
    const int in = l == 0 ? ch[0] : ch[static_cast<std::size_t>(l) - 1];
    L.encoder.push_back(
        std::make_unique<ResidualBlock>("enc" + std::to_string(l), in, ch[static_cast<std::size_t>(l)], k, bn, rng));
    L.pools.emplace_back();
    audit_.encoder_channels.push_back(ch[static_cast<std::size_t>(l)]);
  }
  L.bottleneck_entry = std::make_unique<Layers::ConvUnit>("bottleneck.entry", ch[static_cast<std::size_t>(spec_.depth) - 1],
                                                          spec_.bottleneck_filters, k, bn, rng);
  audit_.conv_layers += 1;
  for (int b = 0; b < spec_.bottleneck_blocks(); ++b) {
    L.bottleneck.push_back(std::make_unique<ResidualBlock>("bottleneck.block" + std::to_string(b),
                                                           spec_.bottleneck_filters, spec_.bottleneck_filters, k, bn,
                                                           rng));
  }
  L.ups.resize(static_cast<std::size_t>(spec_.depth));
  L.decoder.resize(static_cast<std::size_t>(spec_.depth));
  for (int l = spec_.depth - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    L.ups[lu] = std::make_unique<nn::ConvTranspose2x2>("up" + std::to_string(l), ch[lu + 1], ch[lu]);
    L.ups[lu]->init(rng);
    L.decoder[lu] = std::make_unique<ResidualBlock>("dec" + std::to_string(l), 2 * ch[lu], ch[lu], k, bn, rng);
  }
  L.head = std::make_unique<nn::Conv2d>("head.conv", ch[0], 1, 1);
  L.head->init(rng);
  audit_.conv_layers += 1;

  L.ablated.assign(static_cast<std::size_t>(spec_.depth), false);
  L.skip_channels.assign(ch.begin(), ch.end() - 1);

  std::vector<const ResidualBlock*> blocks;
  for (const auto& b : L.encoder) blocks.push_back(b.get());
  for (const auto& b : L.bottleneck) blocks.push_back(b.get());
  for (const auto& b : L.decoder) blocks.push_back(b.get());
  audit_.residual_blocks = static_cast<int>(blocks.size());
  audit_.conv_layers += 2 * audit_.residual_blocks;
  for (const ResidualBlock* b : blocks) audit_.shortcut_projections += b->has_projection() ? 1 : 0;
  audit_.up_convolutions = static_cast<int>(L.ups.size());
  audit_.skip_connections = spec_.depth;
  audit_.bottleneck_channels = spec_.bottleneck_filters;
  audit_.batch_norm_layers = bn ? 2 + 2 * audit_.residual_blocks : 0;

  if (audit_.residual_blocks != spec_.residual_blocks || audit_.conv_layers != 2 * spec_.residual_blocks + 3) {
    throw std::logic_error("segmenter layer inventory does not match its spec");
  }
}

SegmenterModel::~SegmenterModel() = default;

void SegmenterModel::set_skip_ablated(int level, bool ablated) {
  if (level < 0 || level >= spec_.depth) throw ValidationError("skip level out of range");
  layers_->ablated[static_cast<std::size_t>(level)] = ablated;
}

nn::Tensor SegmenterModel::forward(const nn::Tensor& x, nn::Mode mode) {
  if (x.shape.c != 1 || x.shape.h != spec_.input_height || x.shape.w != spec_.input_width) {
    throw ShapeError("segmenter expects input (N, 1, " + std::to_string(spec_.input_height) + ", " +
                     std::to_string(spec_.input_width) + "), got " + x.shape.str());
  }
  auto& L = *layers_;
  const auto depth = static_cast<std::size_t>(spec_.depth);
  std::vector<nn::Tensor> skips(depth);
  nn::Tensor h = L.stem->forward(x, mode);
  for (std::size_t l = 0; l < depth; ++l) {
    if (l > 0) h = L.pools[l - 1].forward(skips[l - 1], mode);
    skips[l] = L.encoder[l]->forward(h, mode);
  }
  h = L.pools[depth - 1].forward(skips[depth - 1], mode);
  h = L.bottleneck_entry->forward(h, mode);
  for (auto& b : L.bottleneck) h = b->forward(h, mode);
  for (std::size_t i = depth; i-- > 0;) {
    nn::Tensor up = L.ups[i]->forward(h, mode);
    if (L.ablated[i]) skips[i].fill(0.0F);
    h = L.decoder[i]->forward(nn::concat_channels(up, skips[i]), mode);
  }
  nn::Tensor probs = nn::sigmoid(L.head->forward(h, mode));
  L.probs = mode == nn::Mode::train ? probs : nn::Tensor{};
  return probs;
}

void SegmenterModel::backward(const nn::Tensor& grad_probs) {
  auto& L = *layers_;
  if (L.probs.empty()) throw std::logic_error("segmenter: backward() without a train-mode forward()");
  const auto depth = static_cast<std::size_t>(spec_.depth);
  nn::Tensor g = L.head->backward(nn::sigmoid_backward(L.probs, grad_probs));

  std::vector<nn::Tensor> g_skip(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    g = L.decoder[i]->backward(g);
    nn::Tensor g_up;
    nn::split_channels(g, g.shape.c - L.skip_channels[i], g_up, g_skip[i]);
    if (L.ablated[i]) g_skip[i].fill(0.0F);
    g = L.ups[i]->backward(g_up);
  }
  for (std::size_t b = L.bottleneck.size(); b-- > 0;) g = L.bottleneck[b]->backward(g);
  g = L.bottleneck_entry->backward(g);
  g = L.pools[depth - 1].backward(g);
  for (std::size_t l = depth; l-- > 0;) {
    nn::add_inplace(g, g_skip[l]);
    g = L.encoder[l]->backward(g);
    if (l > 0) g = L.pools[l - 1].backward(g);
  }
  L.stem->backward(g);
}

std::vector<nn::Parameter*> SegmenterModel::parameters() {
  auto& L = *layers_;
  std::vector<nn::Parameter*> out;
  L.stem->collect(out);
  for (auto& b : L.encoder) b->collect(out);
  L.bottleneck_entry->collect(out);
  for (auto& b : L.bottleneck) b->collect(out);
  for (std::size_t i = L.ups.size(); i-- > 0;) {
    L.ups[i]->collect(out);
    L.decoder[i]->collect(out);
  }
  L.head->collect(out);
  return out;
}

nlohmann::json SegmenterModel::describe() const {
  return {{"task", "segmentation"},
          {"spec", to_json(spec_)},
          {"architecture", audit_.to_json()},
          {"layout",
           "stem conv; per encoder level one residual block then 2x2 max pool; bottleneck entry conv plus residual "
           "blocks; per decoder level 2x2 transposed conv, skip concatenation, one residual block; 1x1 output conv "
           "with sigmoid. conv_layers counts k x k convolutions and the output conv; shortcut projections and "
           "transposed convolutions are listed separately."},
          {"input_resolution", {spec_.input_height, spec_.input_width}},
          {"threshold_default", spec_.threshold}};
}

std::unique_ptr<SegmenterModel> build_segmenter(const SegmenterSpec& spec, std::uint64_t seed) {
  spec.validate();
  return std::make_unique<SegmenterModel>(spec, seed);
}

ImageTensor predict_probabilities(SegmenterModel& model, const ImageTensor& img) {
  const nn::Tensor probs = model.forward(nn::to_batch(img), nn::Mode::infer);
  ImageTensor out(img.height, img.width);
  std::copy(probs.data.begin(), probs.data.end(), out.pixels.begin());
  return out;
}

SegmentationMask threshold_map(const ImageTensor& probs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  SegmentationMask mask(probs.height, probs.width);
  mask.threshold_used = threshold;
  for (std::size_t i = 0; i < probs.pixels.size(); ++i) {
    mask.pixels[i] = static_cast<double>(probs.pixels[i]) >= threshold ? 1 : 0;
  }
  return mask;
}

SegmentationMask predict_mask(SegmenterModel& model, const ImageTensor& img, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  return threshold_map(predict_probabilities(model, img), threshold);
}

}  // namespace neuroscan::segmenter
