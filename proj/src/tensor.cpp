#include "radon/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace radon {

std::string shape_to_string(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError(detail::msg("non-positive dimension in shape ", shape_to_string(s)));
    n *= static_cast<size_t>(d);
  }
  return n;
}

Tensor make_tensor(Shape shape, std::vector<float> values) {
  auto impl = std::make_shared<TensorData>();
  const size_t n = shape_numel(shape);
  if (n != values.size()) {
    throw ShapeError(detail::msg("shape ", shape_to_string(shape), " wants ", n,
                                 " values, got ", values.size()));
  }
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const size_t n = shape_numel(shape);
  Tensor t = make_tensor(std::move(shape), std::vector<float>(n, 0.0f));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(Shape shape, float value) {
  const size_t n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<float>(n, value));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> values) {
  return make_tensor(std::move(shape), std::move(values));
}

Tensor Tensor::scalar(float value) { return make_tensor({1}, {value}); }

float Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError(detail::msg("item() on tensor of shape ", shape_to_string(shape())));
  }
  return impl_->data[0];
}

std::span<const float> Tensor::grad() const& {
  if (impl_->grad.empty()) {
    throw ValidationError(detail::msg("tensor ", name().empty() ? "<unnamed>" : name(),
                                      " has no gradient"));
  }
  return impl_->grad;
}

Tensor Tensor::clone() const {
  Tensor t = make_tensor(impl_->shape, impl_->data);
  t.impl_->name = impl_->name;
  return t;
}

void Tensor::copy_from(const Tensor& src) {
  if (src.shape() != shape()) {
    throw ShapeError(detail::msg("copy_from: shape ", shape_to_string(src.shape()),
                                 " into ", shape_to_string(shape())));
  }
  impl_->data = src.impl_->data;
}

// --- tape ---------------------------------------------------------------

namespace {

thread_local std::vector<Tape*> t_tape_stack;
thread_local int t_no_grad_depth = 0;

Tape* active_tape() {
  if (t_no_grad_depth > 0 || t_tape_stack.empty()) return nullptr;
  return t_tape_stack.back();
}

std::vector<float>& grad_buffer(const std::shared_ptr<TensorData>& node) {
  if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0f);
  return node->grad;
}

}  // namespace

Tape::Tape() { t_tape_stack.push_back(this); }

Tape::~Tape() {
  auto it = std::find(t_tape_stack.begin(), t_tape_stack.end(), this);
  if (it != t_tape_stack.end()) t_tape_stack.erase(it);
}

Tape* Tape::active() { return active_tape(); }

void Tape::record(std::vector<std::shared_ptr<TensorData>> inputs,
                  std::shared_ptr<TensorData> output, std::function<void()> backward_fn) {
  entries_.push_back({std::move(inputs), std::move(output), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ValidationError("tape already consumed; rebuild the forward pass");
  if (loss.numel() != 1) {
    throw ValidationError(detail::msg("backward() needs a scalar loss, got shape ",
                                      shape_to_string(loss.shape())));
  }
  const auto target = loss.node();
  bool recorded = false;
  for (const auto& e : entries_) {
    if (e.output == target) {
      recorded = true;
      break;
    }
  }
  if (!recorded) throw ValidationError("loss was not produced by this tape's forward pass");

  grad_buffer(target)[0] = 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // nothing flowed through this op
    it->backward_fn();
  }
  consumed_ = true;
}

NoGradGuard::NoGradGuard() { ++t_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --t_no_grad_depth; }

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (!tape) throw ValidationError("backward() called with no active tape");
  tape->backward(loss);
}

// --- op plumbing ----------------------------------------------------------

namespace {

// Allocates the output and wires the tape entry when grad is being tracked.
Tensor finish_op(std::vector<Tensor> inputs, Shape out_shape, std::vector<float> out_data,
                 const std::function<std::function<void()>(std::vector<std::shared_ptr<TensorData>>,
                                                           std::shared_ptr<TensorData>)>& make_backward) {
  Tensor out = make_tensor(std::move(out_shape), std::move(out_data));
  Tape* tape = active_tape();
  bool track = false;
  if (tape) {
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorData>> in_nodes;
    in_nodes.reserve(inputs.size());
    for (const auto& in : inputs) in_nodes.push_back(in.node());
    auto out_node = out.node();
    auto backward_fn = make_backward(in_nodes, out_node);
    tape->record(std::move(in_nodes), std::move(out_node), std::move(backward_fn));
  }
  return out;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(detail::msg(op, ": shapes differ, ", shape_to_string(a.shape()), " vs ",
                                 shape_to_string(b.shape())));
  }
}

void require_rank(const char* op, const Tensor& t, size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(detail::msg(op, ": expected rank-", rank, " tensor, got ",
                                 shape_to_string(t.shape())));
  }
}

}  // namespace

// --- conv2d ---------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
  require_rank("conv2d", input, 4);
  require_rank("conv2d", kernel, 4);
  require_rank("conv2d", bias, 1);
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");

  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int K = kernel.dim(0), KC = kernel.dim(1), R = kernel.dim(2), S = kernel.dim(3);
  if (KC != C) {
    throw ShapeError(detail::msg("conv2d: kernel channels ", KC, " != input channels ", C,
                                 " (input ", shape_to_string(input.shape()), ", kernel ",
                                 shape_to_string(kernel.shape()), ")"));
  }
  if (bias.dim(0) != K) {
    throw ShapeError(detail::msg("conv2d: bias size ", bias.dim(0), " != output channels ", K));
  }
  if (R > H + 2 * padding || S > W + 2 * padding) {
    throw ShapeError(detail::msg("conv2d: kernel ", R, "x", S, " exceeds padded input ",
                                 H + 2 * padding, "x", W + 2 * padding));
  }
  const int OH = (H + 2 * padding - R) / stride + 1;
  const int OW = (W + 2 * padding - S) / stride + 1;

  std::vector<float> out(static_cast<size_t>(N) * K * OH * OW);
  const float* x = input.values().data();
  const float* w = kernel.values().data();
  const float* b = bias.values().data();

  // One (n,k) output plane per task; 64-bit accumulation per plane.
  parallel_for(static_cast<size_t>(N) * K, [&](size_t nk) {
    const int n = static_cast<int>(nk) / K;
    const int k = static_cast<int>(nk) % K;
    std::vector<double> acc(static_cast<size_t>(OH) * OW, static_cast<double>(b[k]));
    for (int c = 0; c < C; ++c) {
      const float* xc = x + (static_cast<size_t>(n) * C + c) * H * W;
      const float* wc = w + (static_cast<size_t>(k) * C + c) * R * S;
      for (int r = 0; r < R; ++r) {
        for (int s = 0; s < S; ++s) {
          const double wv = wc[r * S + s];
          for (int oh = 0; oh < OH; ++oh) {
            const int ih = oh * stride - padding + r;
            if (ih < 0 || ih >= H) continue;
            const float* xrow = xc + static_cast<size_t>(ih) * W;
            double* arow = acc.data() + static_cast<size_t>(oh) * OW;
            // valid ow range: 0 <= ow*stride - padding + s < W
            int ow_lo = 0;
            const int off = s - padding;
            if (off < 0) ow_lo = (-off + stride - 1) / stride;
            int ow_hi = OW;  // exclusive
            const int max_i = W - 1 - off;
            if (max_i < 0)
              ow_hi = 0;
            else
              ow_hi = std::min(OW, max_i / stride + 1);
            for (int ow = ow_lo; ow < ow_hi; ++ow) {
              arow[ow] += wv * xrow[ow * stride + off];
            }
          }
        }
      }
    }
    float* orow = out.data() + nk * OH * OW;
    for (size_t i = 0; i < acc.size(); ++i) orow[i] = static_cast<float>(acc[i]);
  });

  auto make_backward = [=](std::vector<std::shared_ptr<TensorData>> ins,
                           std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [=]() {
      const auto& xin = ins[0];
      const auto& kin = ins[1];
      const auto& bin = ins[2];
      const float* g = outn->grad.data();
      // d(bias)
      if (bin->requires_grad) {
        auto& gb = grad_buffer(bin);
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          for (int n = 0; n < N; ++n) {
            const float* gp = g + (static_cast<size_t>(n) * K + k) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) acc += gp[i];
          }
          gb[k] += static_cast<float>(acc);
        }
      }
      // d(kernel): one (k,c) slice per task
      if (kin->requires_grad) {
        auto& gk = grad_buffer(kin);
        const float* xv = xin->data.data();
        parallel_for(static_cast<size_t>(K) * C, [&](size_t kc) {
          const int k = static_cast<int>(kc) / C;
          const int c = static_cast<int>(kc) % C;
          for (int r = 0; r < R; ++r) {
            for (int s = 0; s < S; ++s) {
              double acc = 0.0;
              for (int n = 0; n < N; ++n) {
                const float* gp = g + (static_cast<size_t>(n) * K + k) * OH * OW;
                const float* xc = xv + (static_cast<size_t>(n) * C + c) * H * W;
                for (int oh = 0; oh < OH; ++oh) {
                  const int ih = oh * stride - padding + r;
                  if (ih < 0 || ih >= H) continue;
                  const float* xrow = xc + static_cast<size_t>(ih) * W;
                  const float* grow = gp + static_cast<size_t>(oh) * OW;
                  const int off = s - padding;
                  int ow_lo = 0;
                  if (off < 0) ow_lo = (-off + stride - 1) / stride;
                  const int max_i = W - 1 - off;
                  const int ow_hi = max_i < 0 ? 0 : std::min(OW, max_i / stride + 1);
                  for (int ow = ow_lo; ow < ow_hi; ++ow) {
                    acc += static_cast<double>(grow[ow]) * xrow[ow * stride + off];
                  }
                }
              }
              gk[(kc * R + r) * S + s] += static_cast<float>(acc);
            }
          }
        });
      }
      // d(input): one (n,c) plane per task
      if (xin->requires_grad) {
        auto& gx = grad_buffer(xin);
        const float* wv = kin->data.data();
        parallel_for(static_cast<size_t>(N) * C, [&](size_t nc) {
          const int n = static_cast<int>(nc) / C;
          const int c = static_cast<int>(nc) % C;
          std::vector<double> acc(static_cast<size_t>(H) * W, 0.0);
          for (int k = 0; k < K; ++k) {
            const float* gp = g + (static_cast<size_t>(n) * K + k) * OH * OW;
            const float* wc = wv + (static_cast<size_t>(k) * C + c) * R * S;
            for (int r = 0; r < R; ++r) {
              for (int s = 0; s < S; ++s) {
                const double wk = wc[r * S + s];
                for (int oh = 0; oh < OH; ++oh) {
                  const int ih = oh * stride - padding + r;
                  if (ih < 0 || ih >= H) continue;
                  double* arow = acc.data() + static_cast<size_t>(ih) * W;
                  const float* grow = gp + static_cast<size_t>(oh) * OW;
                  const int off = s - padding;
                  int ow_lo = 0;
                  if (off < 0) ow_lo = (-off + stride - 1) / stride;
                  const int max_i = W - 1 - off;
                  const int ow_hi = max_i < 0 ? 0 : std::min(OW, max_i / stride + 1);
                  for (int ow = ow_lo; ow < ow_hi; ++ow) {
                    arow[ow * stride + off] += wk * grow[ow];
                  }
                }
              }
            }
          }
          float* gxp = gx.data() + nc * H * W;
          for (size_t i = 0; i < acc.size(); ++i) gxp[i] += static_cast<float>(acc[i]);
        });
      }
    };
  };

  return finish_op({input, kernel, bias}, {N, K, OH, OW}, std::move(out), make_backward);
}

// --- maxpool2d --------------------------------------------------------------

Tensor maxpool2d(const Tensor& input, int window, int stride) {
  require_rank("maxpool2d", input, 4);
  if (window < 1 || stride < 1) throw ShapeError("maxpool2d: window and stride must be >= 1");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (window > H || window > W) {
    throw ShapeError(detail::msg("maxpool2d: window ", window, " exceeds spatial extent ", H,
                                 "x", W));
  }
  const int OH = (H - window) / stride + 1;
  const int OW = (W - window) / stride + 1;

  std::vector<float> out(static_cast<size_t>(N) * C * OH * OW);
  // argmax per output cell, flat index into the input plane
  auto argmax = std::make_shared<std::vector<int>>(out.size());
  const float* x = input.values().data();

  for (int nc = 0; nc < N * C; ++nc) {
    const float* plane = x + static_cast<size_t>(nc) * H * W;
    float* op = out.data() + static_cast<size_t>(nc) * OH * OW;
    int* ap = argmax->data() + static_cast<size_t>(nc) * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      for (int ow = 0; ow < OW; ++ow) {
        const int h0 = oh * stride, w0 = ow * stride;
        float best = plane[h0 * W + w0];
        int best_i = h0 * W + w0;
        for (int r = 0; r < window; ++r) {
          for (int s = 0; s < window; ++s) {
            const int i = (h0 + r) * W + (w0 + s);
            if (plane[i] > best) {  // strict: first row-major max wins ties
              best = plane[i];
              best_i = i;
            }
          }
        }
        op[oh * OW + ow] = best;
        ap[oh * OW + ow] = best_i;
      }
    }
  }

  auto make_backward = [=](std::vector<std::shared_ptr<TensorData>> ins,
                           std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [=]() {
      const auto& xin = ins[0];
      if (!xin->requires_grad) return;
      auto& gx = grad_buffer(xin);
      const float* g = outn->grad.data();
      const auto& am = *argmax;
      for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
        const float* gp = g + nc * OH * OW;
        const int* ap = am.data() + nc * OH * OW;
        float* gxp = gx.data() + nc * H * W;
        for (int i = 0; i < OH * OW; ++i) gxp[ap[i]] += gp[i];
      }
    };
  };

  return finish_op({input}, {N, C, OH, OW}, std::move(out), make_backward);
}

// --- dense ------------------------------------------------------------------

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank("dense", input, 2);
  require_rank("dense", weight, 2);
  require_rank("dense", bias, 1);
  const int N = input.dim(0), D = input.dim(1);
  const int WD = weight.dim(0), E = weight.dim(1);
  if (WD != D) {
    throw ShapeError(detail::msg("dense: input width ", D, " != weight rows ", WD, " (input ",
                                 shape_to_string(input.shape()), ", weight ",
                                 shape_to_string(weight.shape()), ")"));
  }
  if (bias.dim(0) != E) {
    throw ShapeError(detail::msg("dense: bias size ", bias.dim(0), " != output width ", E));
  }

  std::vector<float> out(static_cast<size_t>(N) * E);
  const float* x = input.values().data();
  const float* w = weight.values().data();
  const float* b = bias.values().data();
  std::vector<double> acc(E);
  for (int n = 0; n < N; ++n) {
    for (int e = 0; e < E; ++e) acc[e] = b[e];
    const float* xr = x + static_cast<size_t>(n) * D;
    for (int d = 0; d < D; ++d) {
      const double xv = xr[d];
      const float* wr = w + static_cast<size_t>(d) * E;
      for (int e = 0; e < E; ++e) acc[e] += xv * wr[e];
    }
    float* orow = out.data() + static_cast<size_t>(n) * E;
    for (int e = 0; e < E; ++e) orow[e] = static_cast<float>(acc[e]);
  }

  auto make_backward = [=](std::vector<std::shared_ptr<TensorData>> ins,
                           std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [=]() {
      const auto& xin = ins[0];
      const auto& win = ins[1];
      const auto& bin = ins[2];
      const float* g = outn->grad.data();
      if (bin->requires_grad) {
        auto& gb = grad_buffer(bin);
        for (int e = 0; e < E; ++e) {
          double a = 0.0;
          for (int n = 0; n < N; ++n) a += g[static_cast<size_t>(n) * E + e];
          gb[e] += static_cast<float>(a);
        }
      }
      if (win->requires_grad) {
        auto& gw = grad_buffer(win);
        const float* xv = xin->data.data();
        std::vector<double> row(E);
        for (int d = 0; d < D; ++d) {
          std::fill(row.begin(), row.end(), 0.0);
          for (int n = 0; n < N; ++n) {
            const double x_nd = xv[static_cast<size_t>(n) * D + d];
            const float* gr = g + static_cast<size_t>(n) * E;
            for (int e = 0; e < E; ++e) row[e] += x_nd * gr[e];
          }
          float* gwr = gw.data() + static_cast<size_t>(d) * E;
          for (int e = 0; e < E; ++e) gwr[e] += static_cast<float>(row[e]);
        }
      }
      if (xin->requires_grad) {
        auto& gx = grad_buffer(xin);
        const float* wv = win->data.data();
        for (int n = 0; n < N; ++n) {
          const float* gr = g + static_cast<size_t>(n) * E;
          float* gxr = gx.data() + static_cast<size_t>(n) * D;
          for (int d = 0; d < D; ++d) {
            const float* wr = wv + static_cast<size_t>(d) * E;
            double a = 0.0;
            for (int e = 0; e < E; ++e) a += static_cast<double>(gr[e]) * wr[e];
            gxr[d] += static_cast<float>(a);
          }
        }
      }
    };
  };

  return finish_op({input, weight, bias}, {N, E}, std::move(out), make_backward);
}

// --- elementwise ops ---------------------------------------------------------

Tensor relu(const Tensor& input) {
  std::vector<float> out(input.numel());
  const auto x = input.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;

  auto make_backward = [](std::vector<std::shared_ptr<TensorData>> ins,
                          std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn]() {
      const auto& xin = ins[0];
      if (!xin->requires_grad) return;
      auto& gx = grad_buffer(xin);
      const float* g = outn->grad.data();
      const float* x = xin->data.data();
      for (size_t i = 0; i < gx.size(); ++i) {
        if (x[i] > 0.0f) gx[i] += g[i];  // subgradient at 0 is 0
      }
    };
  };
  return finish_op({input}, input.shape(), std::move(out), make_backward);
}

namespace {
// largest float strictly below 1 keeps scores inside the open interval
constexpr float kOneBelow = 0x1.fffffep-1f;
constexpr float kZeroAbove = 0x1p-126f;

float stable_sigmoid(float xf) {
  const double x = xf;
  double v;
  if (x >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    v = e / (1.0 + e);
  }
  float out = static_cast<float>(v);
  if (out >= 1.0f) out = kOneBelow;
  if (out <= 0.0f) out = kZeroAbove;
  return out;
}
}  // namespace

Tensor sigmoid(const Tensor& input) {
  std::vector<float> out(input.numel());
  const auto x = input.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(x[i]);

  auto make_backward = [](std::vector<std::shared_ptr<TensorData>> ins,
                          std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn]() {
      const auto& xin = ins[0];
      if (!xin->requires_grad) return;
      auto& gx = grad_buffer(xin);
      const float* g = outn->grad.data();
      const float* y = outn->data.data();
      for (size_t i = 0; i < gx.size(); ++i) {
        gx[i] += g[i] * y[i] * (1.0f - y[i]);
      }
    };
  };
  return finish_op({input}, input.shape(), std::move(out), make_backward);
}

Tensor abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape("abs_diff", a, b);
  std::vector<float> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(av[i] - bv[i]);

  auto make_backward = [](std::vector<std::shared_ptr<TensorData>> ins,
                          std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn]() {
      const auto& an = ins[0];
      const auto& bn = ins[1];
      const float* g = outn->grad.data();
      const float* av = an->data.data();
      const float* bv = bn->data.data();
      const size_t n = outn->data.size();
      if (an->requires_grad) {
        auto& ga = grad_buffer(an);
        for (size_t i = 0; i < n; ++i) {
          const float d = av[i] - bv[i];
          if (d > 0.0f)
            ga[i] += g[i];
          else if (d < 0.0f)
            ga[i] -= g[i];  // sign(0) == 0
        }
      }
      if (bn->requires_grad) {
        auto& gb = grad_buffer(bn);
        for (size_t i = 0; i < n; ++i) {
          const float d = av[i] - bv[i];
          if (d > 0.0f)
            gb[i] -= g[i];
          else if (d < 0.0f)
            gb[i] += g[i];
        }
      }
    };
  };
  return finish_op({a, b}, a.shape(), std::move(out), make_backward);
}

namespace {
constexpr double kBceEps = 1e-7;
}

Tensor bce_loss(const Tensor& p, const Tensor& y) {
  require_same_shape("bce_loss", p, y);
  const auto pv = p.values();
  const auto yv = y.values();
  const size_t n = p.numel();
  if (n == 0) throw ValidationError("bce_loss: empty batch");
  for (size_t i = 0; i < n; ++i) {
    if (yv[i] != 0.0f && yv[i] != 1.0f) {
      throw ValidationError(detail::msg("bce_loss: label at index ", i, " is ", yv[i],
                                        ", must be 0 or 1"));
    }
    if (pv[i] < 0.0f || pv[i] > 1.0f) {
      throw ValidationError(detail::msg("bce_loss: probability at index ", i, " is ", pv[i],
                                        ", must be in [0,1]"));
    }
  }
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double pc = std::clamp(static_cast<double>(pv[i]), kBceEps, 1.0 - kBceEps);
    if (yv[i] == 1.0f)
      acc -= std::log(pc);
    else
      acc -= std::log(1.0 - pc);
  }
  std::vector<float> out{static_cast<float>(acc / static_cast<double>(n))};

  auto make_backward = [n](std::vector<std::shared_ptr<TensorData>> ins,
                           std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn, n]() {
      const auto& pn = ins[0];
      if (!pn->requires_grad) return;
      auto& gp = grad_buffer(pn);
      const float g = outn->grad[0];
      const float* pv = pn->data.data();
      const float* yv = ins[1]->data.data();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) {
        const double pd = pv[i];
        if (pd < kBceEps || pd > 1.0 - kBceEps) continue;  // clamp region: flat
        const double d = yv[i] == 1.0f ? -1.0 / pd : 1.0 / (1.0 - pd);
        gp[i] += static_cast<float>(g * d * inv_n);
      }
    };
  };
  return finish_op({p, y}, {1}, std::move(out), make_backward);
}

Tensor sum(const Tensor& input) {
  double acc = 0.0;
  for (float v : input.values()) acc += v;
  std::vector<float> out{static_cast<float>(acc)};

  auto make_backward = [](std::vector<std::shared_ptr<TensorData>> ins,
                          std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn]() {
      const auto& xin = ins[0];
      if (!xin->requires_grad) return;
      auto& gx = grad_buffer(xin);
      const float g = outn->grad[0];
      for (auto& v : gx) v += g;
    };
  };
  return finish_op({input}, {1}, std::move(out), make_backward);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<float> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];

  auto make_backward = [](std::vector<std::shared_ptr<TensorData>> ins,
                          std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn]() {
      const auto& an = ins[0];
      const auto& bn = ins[1];
      const float* g = outn->grad.data();
      const size_t n = outn->data.size();
      if (an->requires_grad) {
        auto& ga = grad_buffer(an);
        const float* bv = bn->data.data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
      }
      if (bn->requires_grad) {
        auto& gb = grad_buffer(bn);
        const float* av = an->data.data();
        for (size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
      }
    };
  };
  return finish_op({a, b}, a.shape(), std::move(out), make_backward);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<float> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];

  auto make_backward = [](std::vector<std::shared_ptr<TensorData>> ins,
                          std::shared_ptr<TensorData> outn) -> std::function<void()> {
    return [ins = std::move(ins), outn]() {
      const float* g = outn->grad.data();
      const size_t n = outn->data.size();
      for (const auto& node : ins) {
        if (!node->requires_grad) continue;
        auto& gi = grad_buffer(node);
        for (size_t i = 0; i < n; ++i) gi[i] += g[i];
      }
    };
  };
  return finish_op({a, b}, a.shape(), std::move(out), make_backward);
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  const Shape& base = items[0].shape();
  Shape out_shape;
  out_shape.push_back(static_cast<int>(items.size()));
  out_shape.insert(out_shape.end(), base.begin(), base.end());
  std::vector<float> out;
  out.reserve(items.size() * items[0].numel());
  for (const auto& t : items) {
    if (t.shape() != base) {
      throw ShapeError(detail::msg("stack: mixed shapes ", shape_to_string(base), " and ",
                                   shape_to_string(t.shape())));
    }
    const auto v = t.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return Tensor::from_data(std::move(out_shape), std::move(out));
}

}  // namespace radon
