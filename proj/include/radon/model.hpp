#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "radon/tensor.hpp"

namespace radon {

enum class LayerKind { conv, maxpool, flatten, dense };
enum class Activation { none, relu };

struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  int channels = 0;  // conv: output channels
  int kernel = 0;    // conv: square kernel size
  int stride = 1;    // conv / maxpool
  int padding = 0;   // conv
  int window = 0;    // maxpool
  int width = 0;     // dense: output width
  Activation activation = Activation::none;

  static LayerSpec conv_layer(int channels, int kernel, int stride, int padding,
                              Activation act = Activation::relu);
  static LayerSpec maxpool_layer(int window, int stride);
  static LayerSpec flatten_layer();
  static LayerSpec dense_layer(int width, Activation act = Activation::none);
};

struct InputShape {
  int channels = 1;
  int height = 0;
  int width = 0;
  bool operator==(const InputShape&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered set of named tensors; the on-disk checkpoint/donor format.
class WeightContainer {
 public:
  void add(std::string name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor* find(const std::string& name) const;
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  size_t size() const { return tensors_.size(); }

  /// RDNW binary container, bit-exact round trip.
  void save(const std::string& path) const;
  static WeightContainer load(const std::string& path);

 private:
  std::vector<NamedTensor> tensors_;
  std::map<std::string, size_t> index_;
};

/// One conv stack mapping [N,C,H,W] images to [N,F] features. Parameter
/// tensors are owned here; layers are named conv1, conv2, ..., dense1, ...
class BranchNet {
 public:
  BranchNet() = default;
  BranchNet(std::vector<LayerSpec> layers, InputShape input);

  void init_parameters(Rng& rng);          // He-uniform kernels, zero biases
  BranchNet deep_copy() const;             // clones parameter storage

  Tensor forward(const Tensor& images) const;
  int feature_width() const { return feature_width_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  /// Layer-name -> parameter tensors, in stack order ("conv1.kernel", ...).
  std::vector<NamedTensor> parameters() const;
  std::vector<std::string> parameterized_layer_names() const;
  /// Tensors of one named layer (kernel/weight first, then bias).
  std::vector<NamedTensor> layer_parameters(const std::string& layer_name) const;
  size_t parameter_count() const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::string> layer_names_;  // empty string for layers without params
  std::vector<Tensor> weights_;           // kernel/weight per layer (undefined if none)
  std::vector<Tensor> biases_;
  InputShape input_;
  int feature_width_ = 0;
};

enum class WeightMode { tied, untied };

std::string to_string(WeightMode mode);
WeightMode weight_mode_from_string(const std::string& s);

struct TransplantEntry {
  std::string layer;
  std::string donor;
  bool transplanted = false;  // false == skipped (not in the map)
};

struct TransplantReport {
  std::vector<TransplantEntry> entries;
  size_t transplanted_count() const;
};

/// Two branch networks plus the L1-merge match head. Tied mode shares one
/// parameter set between the branches; untied mode clones the initial
/// weights and lets each branch train on its own gradients.
class SiameseModel {
 public:
  static SiameseModel build(const std::vector<LayerSpec>& layers, InputShape input,
                            WeightMode mode, uint64_t seed);

  /// sigmoid(dense(|f_a(a) - f_b(b)|)) -> [N,1] match probabilities.
  Tensor score(const Tensor& images_a, const Tensor& images_b) const;
  Tensor features_a(const Tensor& images) const { return branch_a_.forward(images); }
  Tensor features_b(const Tensor& images) const { return branch_b_.forward(images); }

  WeightMode mode() const { return mode_; }
  InputShape input_shape() const { return input_; }
  int feature_width() const { return branch_a_.feature_width(); }

  /// All parameters with qualified names (branch.*, branch_a.*, head.*).
  /// Tied mode lists each shared tensor once.
  std::vector<NamedTensor> parameters() const;
  /// parameters() minus the freeze mask. Mask entries match a full
  /// parameter name, a qualified layer ("branch_a.conv1") or a bare layer
  /// name ("conv1", freezing it in both branches).
  std::vector<NamedTensor> trainable_parameters() const;
  size_t parameter_count() const;

  std::set<std::string>& freeze_mask() { return freeze_mask_; }
  const std::set<std::string>& freeze_mask() const { return freeze_mask_; }

  /// Copies mapped donor layers into BOTH branches. layer_map maps a
  /// branch layer name ("conv1") to the donor name prefix holding the
  /// tensors ("<prefix>.kernel" / "<prefix>.weight" and "<prefix>.bias").
  /// Everything is validated before any tensor is written.
  TransplantReport transplant(const WeightContainer& donor,
                              const std::map<std::string, std::string>& layer_map);

  void save_weights(const std::string& path) const;
  /// Validates names and shapes against this model before mutating it.
  void load_weights(const std::string& path);

  const std::vector<LayerSpec>& layer_specs() const { return branch_a_.layers(); }
  std::vector<std::string> branch_layer_names() const {
    return branch_a_.parameterized_layer_names();
  }

 private:
  BranchNet branch_a_;
  BranchNet branch_b_;  // tied: aliases branch_a_'s tensors
  Tensor head_weight_;  // [F,1]
  Tensor head_bias_;    // [1]
  WeightMode mode_ = WeightMode::untied;
  InputShape input_;
  std::set<std::string> freeze_mask_;
};

}  // namespace radon
