#include "neuroscan/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "neuroscan/efficientnet.hpp"
#include "neuroscan/error.hpp"
#include "neuroscan/nn/archive.hpp"
#include "neuroscan/nn/batch.hpp"

namespace neuroscan::classifier {

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::pretrained_b1: return "pretrained_b1";
    case BackboneKind::tiny_cnn: return "tiny_cnn";
  }
  return "unknown";
}

BackboneKind backbone_from_string(std::string_view name) {
  if (name == "pretrained_b1") return BackboneKind::pretrained_b1;
  if (name == "tiny_cnn") return BackboneKind::tiny_cnn;
  throw ValidationError("unknown backbone '" + std::string(name) + "' (expected pretrained_b1 or tiny_cnn)");
}

void ClassifierSpec::validate() const {
  if (hidden_units < 1) throw ValidationError("hidden_units must be positive");
  if (num_classes != static_cast<int>(kNumClasses)) {
    throw ValidationError("num_classes must be 4 (meningioma, glioma, pituitary, no_tumor)");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must lie in [0, 1)");
  if (input_height < 8 || input_width < 8) throw ValidationError("classifier input must be at least 8x8");
  if (backbone == BackboneKind::pretrained_b1) {
    if (!backbone_weights) throw ValidationError("backbone pretrained_b1 requires backbone weights (--backbone-weights)");
    if (!freeze_backbone) throw ValidationError("backbone pretrained_b1 can only be used frozen");
  }
}

nlohmann::json to_json(const ClassifierSpec& spec) {
  return {{"backbone", std::string(to_string(spec.backbone))},
          {"freeze_backbone", spec.freeze_backbone},
          {"hidden_units", spec.hidden_units},
          {"num_classes", spec.num_classes},
          {"dropout_rate", spec.dropout_rate},
          {"input_size", {spec.input_height, spec.input_width}},
          {"backbone_weights", spec.backbone_weights ? nlohmann::json(spec.backbone_weights->string())
                                                     : nlohmann::json(nullptr)}};
}

ClassifierSpec spec_from_json(const nlohmann::json& j) {
  ClassifierSpec s;
  try {
    s.backbone = backbone_from_string(j.value("backbone", std::string(to_string(s.backbone))));
    s.freeze_backbone = j.value("freeze_backbone", s.freeze_backbone);
    s.hidden_units = j.value("hidden_units", s.hidden_units);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.dropout_rate = j.value("dropout_rate", s.dropout_rate);
    if (j.contains("input_size")) {
      s.input_height = j.at("input_size").at(0).get<int>();
      s.input_width = j.at("input_size").at(1).get<int>();
    }
    if (j.contains("backbone_weights") && !j.at("backbone_weights").is_null()) {
      s.backbone_weights = j.at("backbone_weights").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed classifier spec: ") + e.what());
  }
  s.validate();
  return s;
}

// --- TinyCnn ----------------------------------------------------------------

TinyCnn::TinyCnn(Rng& rng)
    : conv1_("backbone.conv1", 1, 16, 3, 1, nn::Padding::same(3)),
      conv2_("backbone.conv2", 16, 32, 3, 1, nn::Padding::same(3)),
      conv3_("backbone.conv3", 32, 64, 3, 1, nn::Padding::same(3)) {
  conv1_.init(rng);
  conv2_.init(rng);
  conv3_.init(rng);
}

nn::Tensor TinyCnn::forward(const nn::Tensor& x, nn::Mode mode) {
  nn::Tensor h = pool1_.forward(relu1_.forward(conv1_.forward(x, mode), mode), mode);
  h = pool2_.forward(relu2_.forward(conv2_.forward(h, mode), mode), mode);
  return relu3_.forward(conv3_.forward(h, mode), mode);
}

nn::Tensor TinyCnn::backward(const nn::Tensor& grad) {
  nn::Tensor g = conv3_.backward(relu3_.backward(grad));
  g = conv2_.backward(relu2_.backward(pool2_.backward(g)));
  return conv1_.backward(relu1_.backward(pool1_.backward(g)));
}

void TinyCnn::collect(std::vector<nn::Parameter*>& out) {
  conv1_.collect(out);
  conv2_.collect(out);
  conv3_.collect(out);
}

// --- ClassifierModel --------------------------------------------------------

ClassifierModel::ClassifierModel(const ClassifierSpec& spec, std::unique_ptr<Backbone> backbone, std::uint64_t seed)
    : spec_(spec),
      backbone_(std::move(backbone)),
      hidden_("head.dense1", backbone_->out_channels(), spec.hidden_units),
      dropout_(static_cast<float>(spec.dropout_rate), derive_seed({seed, 0xd40ULL})),
      output_("head.dense2", spec.hidden_units, spec.num_classes) {
  Rng rng(derive_seed({seed, 0x4eadULL}));
  hidden_.init(rng);
  output_.init(rng);
  if (spec_.freeze_backbone) {
    for (nn::Parameter* p : backbone_parameters()) p->trainable = false;
  }
}

std::vector<nn::Parameter*> ClassifierModel::backbone_parameters() {
  std::vector<nn::Parameter*> out;
  backbone_->collect(out);
  return out;
}

std::vector<nn::Parameter*> ClassifierModel::head_parameters() {
  std::vector<nn::Parameter*> out;
  hidden_.collect(out);
  output_.collect(out);
  return out;
}

std::vector<nn::Parameter*> ClassifierModel::parameters() {
  auto out = backbone_parameters();
  const auto head = head_parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

nn::Tensor ClassifierModel::to_backbone_channels(const nn::Tensor& x) const {
  if (x.shape.h != spec_.input_height || x.shape.w != spec_.input_width) {
    throw ShapeError("classifier expects input " + std::to_string(spec_.input_height) + "x" +
                     std::to_string(spec_.input_width) + ", got " + x.shape.str());
  }
  const int want = backbone_->in_channels();
  if (x.shape.c == want) return x;
  if (x.shape.c != 1) throw ShapeError("classifier expects 1-channel input, got " + x.shape.str());
  // Grayscale to RGB by channel replication.
  nn::Tensor out({x.shape.n, want, x.shape.h, x.shape.w});
  for (int n = 0; n < x.shape.n; ++n) {
    const auto src = x.sample(n);
    for (int c = 0; c < want; ++c) {
      std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(out.offset(n, c, 0, 0)));
    }
  }
  return out;
}

nn::Tensor ClassifierModel::forward(const nn::Tensor& x, nn::Mode mode) {
  const nn::Tensor input = to_backbone_channels(x);
  // A frozen backbone never needs its activations cached.
  backbone_trained_ = mode == nn::Mode::train && !spec_.freeze_backbone;
  const nn::Tensor features = backbone_->forward(input, backbone_trained_ ? nn::Mode::train : nn::Mode::infer);
  nn::Tensor h = pool_.forward(features, backbone_trained_ ? nn::Mode::train : nn::Mode::infer);
  h = hidden_.forward(h, mode);
  h = relu_.forward(h, mode);
  h = dropout_.forward(h, mode);
  nn::Tensor logits = output_.forward(h, mode);
  nn::Tensor probs = nn::softmax(logits);
  probs_ = mode == nn::Mode::train ? probs : nn::Tensor{};
  return probs;
}

void ClassifierModel::backward(const nn::Tensor& grad_probs) {
  if (probs_.empty()) throw std::logic_error("classifier: backward() without a train-mode forward()");
  nn::Tensor g = nn::softmax_backward(probs_, grad_probs);
  g = output_.backward(g);
  g = dropout_.backward(g);
  g = relu_.backward(g);
  g = hidden_.backward(g);
  if (backbone_trained_) backbone_->backward(pool_.backward(g));
}

nlohmann::json ClassifierModel::describe() const {
  nlohmann::json class_order = nlohmann::json::array();
  for (Label l : kClassOrder) class_order.push_back(std::string(to_string(l)));
  return {{"task", "classification"},
          {"spec", to_json(spec_)},
          {"class_order", class_order},
          {"backbone_channels", backbone_->out_channels()},
          {"head_widths", {hidden_.out_features(), output_.out_features()}},
          {"input_resolution", {spec_.input_height, spec_.input_width}}};
}

std::unique_ptr<ClassifierModel> build_classifier(const ClassifierSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::unique_ptr<Backbone> backbone;
  switch (spec.backbone) {
    case BackboneKind::tiny_cnn: {
      Rng rng(derive_seed({seed, 0xbac4ULL}));
      backbone = std::make_unique<TinyCnn>(rng);
      if (spec.backbone_weights) {
        std::vector<nn::Parameter*> params;
        backbone->collect(params);
        nn::load_into(nn::read_tensors(*spec.backbone_weights), params);
      }
      break;
    }
    case BackboneKind::pretrained_b1:
      backbone = efficientnet::make_b1_backbone(nn::read_tensors(*spec.backbone_weights));
      break;
  }
  return std::make_unique<ClassifierModel>(spec, std::move(backbone), seed);
}

Label ClassProbabilities::argmax() const {
  return kClassOrder[static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin())];
}

ClassProbabilities predict_class(ClassifierModel& model, const ImageTensor& img) {
  const nn::Tensor probs = model.forward(nn::to_batch(img), nn::Mode::infer);
  ClassProbabilities out;
  for (std::size_t i = 0; i < kNumClasses; ++i) out.probs[i] = probs.data[i];
  return out;
}

}  // namespace neuroscan::classifier
