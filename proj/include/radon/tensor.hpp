#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "radon/common.hpp"

namespace radon {

using Shape = std::vector<int>;

std::string shape_to_string(const Shape& s);
size_t shape_numel(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
  std::string name;  // registry name, used in diagnostics
};

/// Shared handle to a dense f32 array. Copies alias the same storage
/// (tied-branch parameters rely on that); clone() makes a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value);
  static Tensor from_data(Shape shape, std::vector<float> values);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int dim(size_t i) const { return impl_->shape[i]; }
  size_t rank() const { return impl_->shape.size(); }
  size_t numel() const { return impl_->data.size(); }

  // Spans into shared storage. Deleted on rvalues: the span must not
  // outlive the handle that produced it.
  std::span<const float> values() const& { return impl_->data; }
  std::span<const float> values() const&& = delete;
  std::span<float> values_mut() & { return impl_->data; }
  std::span<float> values_mut() && = delete;
  float item() const;  // numel()==1 only

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const float> grad() const&;
  std::span<const float> grad() const&& = delete;
  void zero_grad() { impl_->grad.clear(); }

  const std::string& name() const { return impl_->name; }
  void set_name(std::string n) { impl_->name = std::move(n); }

  Tensor clone() const;
  void copy_from(const Tensor& src);  // same shape required
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  std::shared_ptr<TensorData> node() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorData> impl_;
  friend class Tape;
  friend Tensor make_tensor(Shape, std::vector<float>);
};

/// Reverse-mode tape. Alive == recording (on this thread). Ops append an
/// entry whenever a tape is active and some input requires grad; backward()
/// replays entries once, in reverse, then marks the tape consumed.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(loss)/d(loss)=1 and accumulates gradients into every
  /// requires_grad tensor that fed the loss. Scalar losses only; a tape
  /// can be walked once.
  void backward(const Tensor& loss);

  size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  static Tape* active();

  // Used by op implementations.
  void record(std::vector<std::shared_ptr<TensorData>> inputs,
              std::shared_ptr<TensorData> output, std::function<void()> backward_fn);

 private:
  struct Entry {
    std::vector<std::shared_ptr<TensorData>> inputs;
    std::shared_ptr<TensorData> output;
    std::function<void()> backward_fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

/// Suppresses recording while alive (probe scoring inside a training step).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// backward() as a free function; requires a live, still-active Tape that
/// recorded the loss.
void backward(const Tensor& loss);

// --- forward operations -------------------------------------------------

/// Cross-correlation (deep-learning "conv"): input [N,C,H,W] with kernel
/// [K,C,R,S] and bias [K]. Output H' = floor((H+2p-R)/stride)+1, same for W.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

/// Window max over [N,C,H,W]; gradient goes to the first maximal cell of
/// each window in row-major order.
Tensor maxpool2d(const Tensor& input, int window, int stride);

/// Affine map: input [N,D] * weight [D,E] + bias [E].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& input);

/// Numerically stable logistic; output clamped to the open interval (0,1)
/// at f32 resolution so downstream code can rely on strict bounds.
Tensor sigmoid(const Tensor& input);

/// Elementwise |a-b|; subgradient 0 at ties.
Tensor abs_diff(const Tensor& a, const Tensor& b);

/// Mean binary cross-entropy with probabilities clamped to
/// [1e-7, 1-1e-7]. Labels must be exactly 0 or 1.
Tensor bce_loss(const Tensor& p, const Tensor& y);

Tensor sum(const Tensor& input);               // full reduction to a scalar
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor add(const Tensor& a, const Tensor& b);  // elementwise, same shape

/// Stack equal-shape tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& items);

}  // namespace radon
