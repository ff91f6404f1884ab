#pragma once

// Independent numeric references for the test suites. Everything here is
// deliberately naive (nested loops, double precision) and shares no code
// with the library implementations it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracle {

struct Array4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;
  Array4() = default;
  Array4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}
  double& at(int a, int b, int y, int x) {
    return v[((static_cast<size_t>(a) * c + b) * h + y) * w + x];
  }
  double at(int a, int b, int y, int x) const {
    return v[((static_cast<size_t>(a) * c + b) * h + y) * w + x];
  }
};

// Cross-correlation with zero padding; six nested spatial loops.
inline Array4 conv2d(const Array4& x, const Array4& k, const std::vector<double>& bias,
                     int stride, int pad) {
  const int oh = (x.h + 2 * pad - k.h) / stride + 1;
  const int ow = (x.w + 2 * pad - k.w) / stride + 1;
  Array4 out(x.n, k.n, oh, ow);
  for (int n = 0; n < x.n; ++n)
    for (int f = 0; f < k.n; ++f)
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo) {
          double acc = bias[f];
          for (int c = 0; c < x.c; ++c)
            for (int r = 0; r < k.h; ++r)
              for (int s = 0; s < k.w; ++s) {
                const int iy = y * stride - pad + r;
                const int ix = xo * stride - pad + s;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += x.at(n, c, iy, ix) * k.at(f, c, r, s);
              }
          out.at(n, f, y, xo) = acc;
        }
  return out;
}

inline Array4 maxpool2d(const Array4& x, int window, int stride) {
  const int oh = (x.h - window) / stride + 1;
  const int ow = (x.w - window) / stride + 1;
  Array4 out(x.n, x.c, oh, ow);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo) {
          double best = -1e300;
          for (int r = 0; r < window; ++r)
            for (int s = 0; s < window; ++s)
              best = std::max(best, x.at(n, c, y * stride + r, xo * stride + s));
          out.at(n, c, y, xo) = best;
        }
  return out;
}

// Triple-loop matmul plus bias: x [n,d] * w [d,e] + b [e].
inline std::vector<double> dense(const std::vector<double>& x, int n, int d,
                                 const std::vector<double>& w, int e,
                                 const std::vector<double>& b) {
  std::vector<double> out(static_cast<size_t>(n) * e, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < e; ++j) {
      double acc = b[j];
      for (int k = 0; k < d; ++k)
        acc += x[static_cast<size_t>(i) * d + k] * w[static_cast<size_t>(k) * e + j];
      out[static_cast<size_t>(i) * e + j] = acc;
    }
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double bce(const std::vector<double>& p, const std::vector<double>& y) {
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
    acc -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  return acc / static_cast<double>(p.size());
}

// Tie-aware Mann-Whitney AUC as an integer numerator over 2*P*N.
struct MannWhitney {
  long long numerator = 0;  // 2*wins + ties
  long long pos = 0, neg = 0;
  double auc() const { return static_cast<double>(numerator) / (2.0 * pos * neg); }
};

inline MannWhitney mann_whitney(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  MannWhitney mw;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1)
      ++mw.pos;
    else
      ++mw.neg;
  }
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j])
        mw.numerator += 2;
      else if (scores[i] == scores[j])
        mw.numerator += 1;
    }
  }
  return mw;
}

// Nearest-neighbour resize reference: source row = dst*src_h/dst_h.
inline std::vector<double> resize_nn(const std::vector<double>& src, int sh, int sw, int dh,
                                     int dw) {
  std::vector<double> out(static_cast<size_t>(dh) * dw);
  for (int y = 0; y < dh; ++y)
    for (int x = 0; x < dw; ++x)
      out[static_cast<size_t>(y) * dw + x] =
          src[static_cast<size_t>(y * sh / dh) * sw + (x * sw / dw)];
  return out;
}

}  // namespace oracle
