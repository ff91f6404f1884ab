#include "radon/model.hpp"

#include <algorithm>
#include <cmath>

namespace radon {

LayerSpec LayerSpec::conv_layer(int channels, int kernel, int stride, int padding,
                                Activation act) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.channels = channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::maxpool_layer(int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::flatten_layer() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

LayerSpec LayerSpec::dense_layer(int width, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.width = width;
  s.activation = act;
  return s;
}

std::string to_string(WeightMode mode) {
  return mode == WeightMode::tied ? "tied" : "untied";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "tied") return WeightMode::tied;
  if (s == "untied") return WeightMode::untied;
  throw ConfigError(detail::msg("unknown weight mode '", s, "' (tied|untied)"));
}

// --- BranchNet ---------------------------------------------------------------

namespace {

struct Dims {
  int c, h, w;      // spatial form, valid while flat == false
  int flat_width;   // valid once flattened
  bool flat = false;
};

[[noreturn]] void bad_layer(size_t idx, const LayerSpec&, const std::string& why) {
  throw ConfigError(detail::msg("layer ", idx + 1, ": ", why));
}

}  // namespace

BranchNet::BranchNet(std::vector<LayerSpec> layers, InputShape input)
    : layers_(std::move(layers)), input_(input) {
  if (input.channels < 1 || input.height < 1 || input.width < 1) {
    throw ConfigError("input shape must have positive channels/height/width");
  }
  Dims d{input.channels, input.height, input.width, 0, false};
  int conv_n = 0, dense_n = 0;
  layer_names_.resize(layers_.size());
  weights_.resize(layers_.size());
  biases_.resize(layers_.size());

  for (size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerKind::conv: {
        if (d.flat) bad_layer(i, l, "conv after flatten");
        if (l.channels < 1 || l.kernel < 1 || l.stride < 1 || l.padding < 0)
          bad_layer(i, l, "conv needs channels/kernel >= 1, stride >= 1, padding >= 0");
        const int oh = (d.h + 2 * l.padding - l.kernel) / l.stride + 1;
        const int ow = (d.w + 2 * l.padding - l.kernel) / l.stride + 1;
        if (l.kernel > d.h + 2 * l.padding || l.kernel > d.w + 2 * l.padding || oh < 1 || ow < 1)
          bad_layer(i, l, detail::msg("conv ", l.kernel, "x", l.kernel, " collapses ", d.h, "x",
                                      d.w, " below 1"));
        layer_names_[i] = "conv" + std::to_string(++conv_n);
        weights_[i] = Tensor::zeros({l.channels, d.c, l.kernel, l.kernel}, true);
        biases_[i] = Tensor::zeros({l.channels}, true);
        d.c = l.channels;
        d.h = oh;
        d.w = ow;
        break;
      }
      case LayerKind::maxpool: {
        if (d.flat) bad_layer(i, l, "maxpool after flatten");
        if (l.window < 1 || l.stride < 1) bad_layer(i, l, "maxpool needs window/stride >= 1");
        if (l.window > d.h || l.window > d.w)
          bad_layer(i, l, detail::msg("maxpool window ", l.window, " exceeds ", d.h, "x", d.w));
        d.h = (d.h - l.window) / l.stride + 1;
        d.w = (d.w - l.window) / l.stride + 1;
        if (d.h < 1 || d.w < 1)
          bad_layer(i, l, detail::msg("maxpool collapses spatial dims below 1"));
        break;
      }
      case LayerKind::flatten: {
        if (d.flat) bad_layer(i, l, "flatten twice");
        d.flat_width = d.c * d.h * d.w;
        d.flat = true;
        break;
      }
      case LayerKind::dense: {
        if (!d.flat) bad_layer(i, l, "dense before flatten");
        if (l.width < 1) bad_layer(i, l, "dense width must be >= 1");
        layer_names_[i] = "dense" + std::to_string(++dense_n);
        weights_[i] = Tensor::zeros({d.flat_width, l.width}, true);
        biases_[i] = Tensor::zeros({l.width}, true);
        d.flat_width = l.width;
        break;
      }
    }
  }
  if (!d.flat) {
    throw ConfigError("layer stack must end with a flat feature vector (missing flatten)");
  }
  feature_width_ = d.flat_width;
  if (feature_width_ < 1) throw ConfigError("feature width must be >= 1");
}

void BranchNet::init_parameters(Rng& rng) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (!weights_[i].defined()) continue;
    const Shape& s = weights_[i].shape();
    // He-uniform: bound sqrt(6 / fan_in); biases zero
    size_t fan_in = 1;
    for (size_t d = 1; d < s.size(); ++d) fan_in *= static_cast<size_t>(s[d]);
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    auto w = weights_[i].values_mut();
    for (auto& v : w) v = (2.0f * rng_unit_float(rng) - 1.0f) * bound;
    auto b = biases_[i].values_mut();
    std::fill(b.begin(), b.end(), 0.0f);
  }
}

BranchNet BranchNet::deep_copy() const {
  BranchNet out = *this;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (!weights_[i].defined()) continue;
    out.weights_[i] = weights_[i].clone();
    out.weights_[i].set_requires_grad(true);
    out.biases_[i] = biases_[i].clone();
    out.biases_[i].set_requires_grad(true);
  }
  return out;
}

Tensor BranchNet::forward(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != input_.channels ||
      images.dim(2) != input_.height || images.dim(3) != input_.width) {
    throw ShapeError(detail::msg("branch input must be [N,", input_.channels, ",",
                                 input_.height, ",", input_.width, "], got ",
                                 shape_to_string(images.shape())));
  }
  Tensor x = images;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerKind::conv:
        x = conv2d(x, weights_[i], biases_[i], l.stride, l.padding);
        break;
      case LayerKind::maxpool:
        x = maxpool2d(x, l.window, l.stride);
        break;
      case LayerKind::flatten: {
        // row-major reshape [N,C,H,W] -> [N, C*H*W]; same storage order
        const int n = x.dim(0);
        const int f = static_cast<int>(x.numel()) / n;
        Tensor flat = Tensor::from_data({n, f},
                                        std::vector<float>(x.values().begin(), x.values().end()));
        if (x.requires_grad() && Tape::active()) {
          flat.set_requires_grad(true);
          auto xin = x.node();
          auto outn = flat.node();
          Tape::active()->record({xin}, outn, [xin, outn] {
            if (!xin->requires_grad) return;
            if (xin->grad.empty()) xin->grad.assign(xin->data.size(), 0.0f);
            for (size_t j = 0; j < outn->grad.size(); ++j) xin->grad[j] += outn->grad[j];
          });
        }
        x = flat;
        break;
      }
      case LayerKind::dense:
        x = dense(x, weights_[i], biases_[i]);
        break;
    }
    if (l.activation == Activation::relu) x = relu(x);
  }
  return x;
}

std::vector<NamedTensor> BranchNet::parameters() const {
  std::vector<NamedTensor> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (!weights_[i].defined()) continue;
    const char* main_name = layers_[i].kind == LayerKind::conv ? ".kernel" : ".weight";
    out.push_back({layer_names_[i] + main_name, weights_[i]});
    out.push_back({layer_names_[i] + ".bias", biases_[i]});
  }
  return out;
}

std::vector<std::string> BranchNet::parameterized_layer_names() const {
  std::vector<std::string> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (weights_[i].defined()) out.push_back(layer_names_[i]);
  }
  return out;
}

std::vector<NamedTensor> BranchNet::layer_parameters(const std::string& layer_name) const {
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (layer_names_[i] == layer_name && weights_[i].defined()) {
      const char* main_name = layers_[i].kind == LayerKind::conv ? ".kernel" : ".weight";
      return {{layer_name + main_name, weights_[i]}, {layer_name + ".bias", biases_[i]}};
    }
  }
  throw ValidationError(detail::msg("no parameterized layer named '", layer_name, "'"));
}

size_t BranchNet::parameter_count() const {
  size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

// --- SiameseModel ------------------------------------------------------------

SiameseModel SiameseModel::build(const std::vector<LayerSpec>& layers, InputShape input,
                                 WeightMode mode, uint64_t seed) {
  SiameseModel m;
  m.mode_ = mode;
  m.input_ = input;
  m.branch_a_ = BranchNet(layers, input);

  Rng rng(mix_seed(seed, 0x5244414eull));  // one stream: branch then head
  m.branch_a_.init_parameters(rng);
  // Both modes start from identical weights; untied owns a separate copy.
  m.branch_b_ = mode == WeightMode::tied ? m.branch_a_ : m.branch_a_.deep_copy();

  const int F = m.branch_a_.feature_width();
  const float bound = std::sqrt(6.0f / static_cast<float>(F));
  std::vector<float> hw(static_cast<size_t>(F));
  for (auto& v : hw) v = (2.0f * rng_unit_float(rng) - 1.0f) * bound;
  m.head_weight_ = Tensor::from_data({F, 1}, std::move(hw));
  m.head_weight_.set_requires_grad(true);
  m.head_bias_ = Tensor::zeros({1}, true);
  return m;
}

Tensor SiameseModel::score(const Tensor& images_a, const Tensor& images_b) const {
  if (images_a.rank() != 4 || images_b.rank() != 4 || images_a.dim(0) != images_b.dim(0)) {
    throw ShapeError(detail::msg("score: batch shapes differ, ",
                                 shape_to_string(images_a.shape()), " vs ",
                                 shape_to_string(images_b.shape())));
  }
  Tensor fa = branch_a_.forward(images_a);
  Tensor fb = branch_b_.forward(images_b);
  Tensor merged = abs_diff(fa, fb);
  return sigmoid(dense(merged, head_weight_, head_bias_));
}

std::vector<NamedTensor> SiameseModel::parameters() const {
  std::vector<NamedTensor> out;
  if (mode_ == WeightMode::tied) {
    for (auto& [name, t] : branch_a_.parameters()) out.push_back({"branch." + name, t});
  } else {
    for (auto& [name, t] : branch_a_.parameters()) out.push_back({"branch_a." + name, t});
    for (auto& [name, t] : branch_b_.parameters()) out.push_back({"branch_b." + name, t});
  }
  out.push_back({"head.weight", head_weight_});
  out.push_back({"head.bias", head_bias_});
  return out;
}

namespace {

// "branch_a.conv1.kernel" is frozen by "branch_a.conv1.kernel",
// "branch_a.conv1", "conv1" or "head".
bool is_frozen(const std::set<std::string>& mask, const std::string& name) {
  if (mask.empty()) return false;
  if (mask.count(name)) return true;
  const size_t last_dot = name.rfind('.');
  if (last_dot != std::string::npos && mask.count(name.substr(0, last_dot))) return true;
  const size_t first_dot = name.find('.');
  if (first_dot != std::string::npos && last_dot != first_dot &&
      mask.count(name.substr(first_dot + 1, last_dot - first_dot - 1)))
    return true;
  return false;
}

}  // namespace

std::vector<NamedTensor> SiameseModel::trainable_parameters() const {
  std::vector<NamedTensor> out;
  for (auto& nt : parameters()) {
    if (!is_frozen(freeze_mask_, nt.name)) out.push_back(nt);
  }
  return out;
}

size_t SiameseModel::parameter_count() const {
  size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

TransplantReport SiameseModel::transplant(const WeightContainer& donor,
                                          const std::map<std::string, std::string>& layer_map) {
  TransplantReport report;
  struct PendingCopy {
    Tensor target;
    const Tensor* source;
  };
  std::vector<PendingCopy> pending;

  for (const std::string& layer : branch_layer_names()) {
    auto it = layer_map.find(layer);
    if (it == layer_map.end()) {
      report.entries.push_back({layer, "", false});
      continue;
    }
    const std::string& prefix = it->second;
    std::vector<BranchNet*> branches;
    branches.push_back(&branch_a_);
    if (mode_ == WeightMode::untied) branches.push_back(&branch_b_);
    for (BranchNet* branch : branches) {
      for (auto& [pname, target] : branch->layer_parameters(layer)) {
        const std::string suffix = pname.substr(pname.rfind('.'));  // ".kernel"/".weight"/".bias"
        const Tensor* src = donor.find(prefix + suffix);
        if (!src && suffix != ".bias") {
          // donors from plain classifier stacks may call every main tensor "weight"
          src = donor.find(prefix + (suffix == ".kernel" ? ".weight" : ".kernel"));
        }
        if (!src) {
          throw ValidationError(detail::msg("transplant: donor tensor '", prefix, suffix,
                                            "' not found for layer '", layer, "'"));
        }
        if (src->shape() != target.shape()) {
          throw ShapeError(detail::msg("transplant: layer '", layer, "' expects ",
                                       shape_to_string(target.shape()), ", donor '", prefix,
                                       suffix, "' is ", shape_to_string(src->shape())));
        }
        pending.push_back({target, src});
      }
    }
    report.entries.push_back({layer, prefix, true});
  }
  for (const auto& [target_layer, donor_prefix] : layer_map) {
    const auto names = branch_layer_names();
    if (std::find(names.begin(), names.end(), target_layer) == names.end()) {
      throw ValidationError(detail::msg("transplant: model has no layer '", target_layer, "'"));
    }
  }
  // everything validated; now mutate
  for (auto& copy : pending) copy.target.copy_from(*copy.source);
  return report;
}

size_t TransplantReport::transplanted_count() const {
  size_t n = 0;
  for (const auto& e : entries) n += e.transplanted ? 1 : 0;
  return n;
}

void SiameseModel::save_weights(const std::string& path) const {
  WeightContainer c;
  for (const auto& [name, t] : parameters()) c.add(name, t);
  c.save(path);
}

void SiameseModel::load_weights(const std::string& path) {
  const WeightContainer c = WeightContainer::load(path);
  auto params = parameters();
  // validate the full name/shape set before touching the model
  for (const auto& [name, t] : params) {
    const Tensor* src = c.find(name);
    if (!src) {
      throw ValidationError(detail::msg("weight file ", path, " is missing tensor '", name, "'"));
    }
    if (src->shape() != t.shape()) {
      throw ShapeError(detail::msg("weight file tensor '", name, "' has shape ",
                                   shape_to_string(src->shape()), ", model expects ",
                                   shape_to_string(t.shape())));
    }
  }
  if (c.size() != params.size()) {
    for (const auto& [name, t] : c.tensors()) {
      bool known = false;
      for (const auto& [pname, pt] : params) known = known || pname == name;
      if (!known)
        throw ValidationError(detail::msg("weight file contains unknown tensor '", name, "'"));
    }
  }
  for (auto& [name, t] : params) t.copy_from(*c.find(name));
}

}  // namespace radon
