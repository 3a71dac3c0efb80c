#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ddrppg/conv/conv3d.hpp"
#include "ddrppg/conv/descriptive.hpp"
#include "ddrppg/core/array.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"

namespace ddrppg {

enum class BlockKind { vanilla, ldc3d };

/// conv (+ bias when un-normalised) -> instance norm -> ReLU. A bias in front
/// of the norm would be cancelled by its mean removal, so normalised blocks
/// carry only the norm's affine shift.
template <class T>
struct ConvBlock {
  BlockKind kind = BlockKind::vanilla;
  bool normalize = true;
  T epsilon = T(0.7);
  Kernel<T> w;
  Kernel<T> m;       // ldc3d only; (out, 1, 3, 3, 3) or (out, in, 3, 3, 3)
  Vector<T> bias;    // un-normalised blocks only
  Vector<T> gamma;   // normalised blocks only
  Vector<T> beta;

  std::size_t in_channels() const { return w.in_channels(); }
  std::size_t out_channels() const { return w.out_channels(); }

  Kernel<T> effective_kernel() const {
    return kind == BlockKind::ldc3d ? ldc_effective_kernel(w, m, epsilon) : w;
  }

  /// Same shapes, all zeros: the gradient accumulator for this block.
  ConvBlock zeros_like() const {
    ConvBlock z = *this;
    z.w.fill(T(0));
    z.m.fill(T(0));
    z.bias.fill(T(0));
    z.gamma.fill(T(0));
    z.beta.fill(T(0));
    return z;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w", w.storage(), std::vector<std::size_t>(w.shape().begin(), w.shape().end()));
    if (kind == BlockKind::ldc3d)
      f(prefix + ".m", m.storage(), std::vector<std::size_t>(m.shape().begin(), m.shape().end()));
    if (normalize) {
      f(prefix + ".gamma", gamma.storage(), std::vector<std::size_t>{gamma.size()});
      f(prefix + ".beta", beta.storage(), std::vector<std::size_t>{beta.size()});
    } else {
      f(prefix + ".bias", bias.storage(), std::vector<std::size_t>{bias.size()});
    }
  }
};

template <class T>
ConvBlock<T> make_block(BlockKind kind, std::size_t in, std::size_t out, bool normalize, T epsilon,
                        bool per_filter_descriptor, Rng& rng) {
  ConvBlock<T> b;
  b.kind = kind;
  b.normalize = normalize;
  b.epsilon = epsilon;
  b.w = Kernel<T>(out, in, 3, 3, 3);
  const double fan_in = static_cast<double>(in * 27);
  const double sd = std::sqrt((normalize ? 2.0 : 1.0) / fan_in);
  for (auto& v : b.w.storage()) v = static_cast<T>(sd * rng.normal());
  if (kind == BlockKind::ldc3d) b.m = ones_descriptor(b.w, per_filter_descriptor);
  if (normalize) {
    b.gamma = Vector<T>({out}, T(1));
    b.beta = Vector<T>({out}, T(0));
  } else {
    b.bias = Vector<T>({out}, T(0));
  }
  return b;
}

inline constexpr double kNormEps = 1e-5;

template <class T>
struct BlockTape {
  Volume<T> input;
  Volume<T> xhat;              // normalised pre-activation
  std::vector<T> inv_std;
  Volume<T> output;            // post-ReLU (normalised) or raw conv (head)
};

template <class T>
Volume<T> block_forward(const ConvBlock<T>& b, const Volume<T>& x, BlockTape<T>* tape = nullptr) {
  Volume<T> y = conv3d(x, b.effective_kernel());
  const std::size_t C = y.channels(), N = y.plane();
  if (!b.normalize) {
    for (std::size_t c = 0; c < C; ++c) {
      T* p = y.data() + c * N;
      for (std::size_t i = 0; i < N; ++i) p[i] += b.bias[c];
    }
    if (tape) {
      tape->input = x;
      tape->output = y;
    }
    return y;
  }
  std::vector<T> inv(C);
  Volume<T> xhat;
  if (tape) xhat = Volume<T>(C, y.frames(), y.height(), y.width());
  for (std::size_t c = 0; c < C; ++c) {
    T* p = y.data() + c * N;
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) mean += p[i];
    mean /= static_cast<double>(N);
    double var = 0.0;
    for (std::size_t i = 0; i < N; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(N);
    const T is = static_cast<T>(1.0 / std::sqrt(var + kNormEps));
    inv[c] = is;
    const T g = b.gamma[c], be = b.beta[c], m = static_cast<T>(mean);
    for (std::size_t i = 0; i < N; ++i) {
      const T h = (p[i] - m) * is;
      if (tape) xhat[c * N + i] = h;
      const T v = g * h + be;
      p[i] = v > T(0) ? v : T(0);
    }
  }
  if (tape) {
    tape->input = x;
    tape->xhat = std::move(xhat);
    tape->inv_std = std::move(inv);
    tape->output = y;
  }
  return y;
}

/// Accumulates parameter gradients into `grads`; returns dL/dx when asked.
template <class T>
Volume<T> block_backward(const ConvBlock<T>& b, const BlockTape<T>& tape, const Volume<T>& gout, ConvBlock<T>& grads,
                         bool need_input = true) {
  Volume<T> gpre = gout;
  const std::size_t C = gout.channels(), N = gout.plane();
  if (!b.normalize) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      const T* p = gout.data() + c * N;
      for (std::size_t i = 0; i < N; ++i) s += p[i];
      grads.bias[c] += static_cast<T>(s);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      T* g = gpre.data() + c * N;
      const T* out = tape.output.data() + c * N;
      const T* h = tape.xhat.data() + c * N;
      double sg = 0.0, sgh = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        if (!(out[i] > T(0))) g[i] = T(0);
        sg += g[i];
        sgh += static_cast<double>(g[i]) * h[i];
      }
      grads.beta[c] += static_cast<T>(sg);
      grads.gamma[c] += static_cast<T>(sgh);
      const double k = static_cast<double>(b.gamma[c]) * tape.inv_std[c] / static_cast<double>(N);
      const double mg = sg, mh = sgh;
      for (std::size_t i = 0; i < N; ++i)
        g[i] = static_cast<T>(k * (static_cast<double>(N) * g[i] - mg - h[i] * mh));
    }
  }
  if (b.kind == BlockKind::ldc3d) {
    auto lg = ldc_backward(tape.input, b.w, b.m, b.epsilon, gpre, need_input);
    grads.w += lg.w;
    grads.m += lg.m;
    return std::move(lg.input);
  }
  auto cg = conv3d_backward(tape.input, b.w, gpre, need_input);
  grads.w += cg.weight;
  return std::move(cg.input);
}

/// 2x2 spatial average pooling (trailing odd row/column dropped).
template <class T>
Volume<T> avg_pool2(const Volume<T>& x) {
  require(x.height() >= 2 && x.width() >= 2, ErrorCode::shape_mismatch,
          "pooling needs spatial size >= 2, got " + x.shape_string());
  const std::size_t H = x.height() / 2, W = x.width() / 2;
  Volume<T> y(x.channels(), x.frames(), H, W);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t t = 0; t < x.frames(); ++t)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          y(c, t, i, j) = T(0.25) * (x(c, t, 2 * i, 2 * j) + x(c, t, 2 * i, 2 * j + 1) + x(c, t, 2 * i + 1, 2 * j) +
                                     x(c, t, 2 * i + 1, 2 * j + 1));
  return y;
}

template <class T>
Volume<T> avg_pool2_backward(const Volume<T>& gout, std::size_t in_h, std::size_t in_w) {
  Volume<T> g(gout.channels(), gout.frames(), in_h, in_w);
  for (std::size_t c = 0; c < gout.channels(); ++c)
    for (std::size_t t = 0; t < gout.frames(); ++t)
      for (std::size_t i = 0; i < gout.height(); ++i)
        for (std::size_t j = 0; j < gout.width(); ++j) {
          const T v = T(0.25) * gout(c, t, i, j);
          g(c, t, 2 * i, 2 * j) = v;
          g(c, t, 2 * i, 2 * j + 1) = v;
          g(c, t, 2 * i + 1, 2 * j) = v;
          g(c, t, 2 * i + 1, 2 * j + 1) = v;
        }
  return g;
}

/// Per-frame mean over H x W of a single-channel volume.
template <class T>
std::vector<T> spatial_mean(const Volume<T>& x) {
  require(x.channels() == 1, ErrorCode::shape_mismatch, "spatial mean expects one channel");
  require(x.height() > 0 && x.width() > 0, ErrorCode::shape_mismatch, "degenerate spatial dims");
  const std::size_t HW = x.height() * x.width();
  std::vector<T> out(x.frames());
  for (std::size_t t = 0; t < x.frames(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < HW; ++i) s += x[t * HW + i];
    out[t] = static_cast<T>(s / static_cast<double>(HW));
  }
  return out;
}

template <class T>
Volume<T> spatial_mean_backward(const std::vector<T>& g, std::size_t h, std::size_t w) {
  Volume<T> out(1, g.size(), h, w);
  const T k = T(1) / static_cast<T>(h * w);
  for (std::size_t t = 0; t < g.size(); ++t)
    for (std::size_t i = 0; i < h * w; ++i) out[t * h * w + i] = g[t] * k;
  return out;
}

}  // namespace ddrppg
