#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Core>

#include "ddrppg/core/array.hpp"
#include "ddrppg/core/error.hpp"

namespace ddrppg {

/// Stride-1 cross-correlation with "same" zero padding (k/2 on every axis),
/// so T, H and W are preserved:
///   g[o,t,y,x] = sum_{i,a,b,c} w[o,i,a,b,c] f[i, t+a-pt, y+b-ph, x+c-pw]
/// With kt = 3, slice a = 0 multiplies f(t-1).
///
/// The fast path is im2col over chunks of frames followed by a GEMM.
namespace conv_detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kChunkPositions = 4096;

inline void check_shapes(std::size_t in_c, std::size_t k_in, std::size_t kt, std::size_t kh, std::size_t kw) {
  require(in_c == k_in, ErrorCode::shape_mismatch,
          "input has " + std::to_string(in_c) + " channels, kernel expects " + std::to_string(k_in));
  require(kt % 2 == 1 && kh % 2 == 1 && kw % 2 == 1, ErrorCode::shape_mismatch, "kernel sizes must be odd");
}

/// Fills cols (C*taps x nt*H*W, row-major) for frames [t0, t0 + nt).
template <class T>
void im2col(const Volume<T>& f, std::size_t kt, std::size_t kh, std::size_t kw, std::size_t t0, std::size_t nt,
            T* cols) {
  const long T_ = static_cast<long>(f.frames()), H = static_cast<long>(f.height()), W = static_cast<long>(f.width());
  const long pt = static_cast<long>(kt / 2), ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  const std::size_t P = nt * f.height() * f.width();
  const T* src = f.data();
  std::size_t row = 0;
  for (std::size_t c = 0; c < f.channels(); ++c) {
    const T* fc = src + c * f.plane();
    for (long a = 0; a < static_cast<long>(kt); ++a)
      for (long b = 0; b < static_cast<long>(kh); ++b)
        for (long cc = 0; cc < static_cast<long>(kw); ++cc, ++row) {
          T* dst = cols + row * P;
          const long x_lo = std::max(0L, pw - cc), x_hi = std::min(W, W + pw - cc);
          for (std::size_t k = 0; k < nt; ++k) {
            const long ts = static_cast<long>(t0 + k) + a - pt;
            T* dt = dst + k * static_cast<std::size_t>(H * W);
            if (ts < 0 || ts >= T_) {
              std::fill(dt, dt + H * W, T(0));
              continue;
            }
            for (long y = 0; y < H; ++y) {
              const long ys = y + b - ph;
              T* dy = dt + y * W;
              if (ys < 0 || ys >= H) {
                std::fill(dy, dy + W, T(0));
                continue;
              }
              const T* s = fc + (ts * H + ys) * W + (cc - pw);
              std::fill(dy, dy + x_lo, T(0));
              for (long x = x_lo; x < x_hi; ++x) dy[x] = s[x];
              std::fill(dy + x_hi, dy + W, T(0));
            }
          }
        }
  }
}

/// Scatter-adds cols back into g (inverse access pattern of im2col).
template <class T>
void col2im_add(const T* cols, std::size_t kt, std::size_t kh, std::size_t kw, std::size_t t0, std::size_t nt,
                Volume<T>& g) {
  const long T_ = static_cast<long>(g.frames()), H = static_cast<long>(g.height()), W = static_cast<long>(g.width());
  const long pt = static_cast<long>(kt / 2), ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  const std::size_t P = nt * g.height() * g.width();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels(); ++c) {
    T* gc = g.data() + c * g.plane();
    for (long a = 0; a < static_cast<long>(kt); ++a)
      for (long b = 0; b < static_cast<long>(kh); ++b)
        for (long cc = 0; cc < static_cast<long>(kw); ++cc, ++row) {
          const T* src = cols + row * P;
          const long x_lo = std::max(0L, pw - cc), x_hi = std::min(W, W + pw - cc);
          for (std::size_t k = 0; k < nt; ++k) {
            const long ts = static_cast<long>(t0 + k) + a - pt;
            if (ts < 0 || ts >= T_) continue;
            const T* st = src + k * static_cast<std::size_t>(H * W);
            for (long y = 0; y < H; ++y) {
              const long ys = y + b - ph;
              if (ys < 0 || ys >= H) continue;
              T* d = gc + (ts * H + ys) * W + (cc - pw);
              const T* sy = st + y * W;
              for (long x = x_lo; x < x_hi; ++x) d[x] += sy[x];
            }
          }
        }
  }
}

inline std::size_t chunk_frames(std::size_t frames, std::size_t plane) {
  return std::clamp<std::size_t>(kChunkPositions / std::max<std::size_t>(plane, 1), 1, frames);
}

}  // namespace conv_detail

template <class T>
Volume<T> conv3d(const Volume<T>& f, const Kernel<T>& w) {
  using namespace conv_detail;
  check_shapes(f.channels(), w.in_channels(), w.kt(), w.kh(), w.kw());
  const std::size_t O = w.out_channels(), K = w.in_channels() * w.taps();
  const std::size_t HW = f.height() * f.width(), TT = f.frames();
  Volume<T> out(O, TT, f.height(), f.width());
  if (TT == 0 || HW == 0) return out;
  const std::size_t step = chunk_frames(TT, HW);
  std::vector<T> cols(K * step * HW);
  Eigen::Map<const RowMat<T>> W(w.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(K));
  for (std::size_t t0 = 0; t0 < TT; t0 += step) {
    const std::size_t nt = std::min(step, TT - t0), P = nt * HW;
    im2col(f, w.kt(), w.kh(), w.kw(), t0, nt, cols.data());
    Eigen::Map<const RowMat<T>> C(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>> Y(out.data() + t0 * HW, static_cast<Eigen::Index>(O),
                                                     static_cast<Eigen::Index>(P),
                                                     Eigen::OuterStride<>(static_cast<Eigen::Index>(TT * HW)));
    Y.noalias() = W * C;
  }
  return out;
}

template <class T>
Volume<T> conv3d_vanilla(const Volume<T>& f, const Kernel<T>& w) {
  return conv3d(f, w);
}

template <class T>
struct ConvGrads {
  Volume<T> input;
  Kernel<T> weight;
};

/// Gradients of conv3d for upstream gradient `gout`. The input gradient is
/// skipped (left empty) when `need_input` is false.
template <class T>
ConvGrads<T> conv3d_backward(const Volume<T>& f, const Kernel<T>& w, const Volume<T>& gout, bool need_input = true) {
  using namespace conv_detail;
  check_shapes(f.channels(), w.in_channels(), w.kt(), w.kh(), w.kw());
  require(gout.channels() == w.out_channels() && gout.frames() == f.frames() && gout.height() == f.height() &&
              gout.width() == f.width(),
          ErrorCode::shape_mismatch, "upstream gradient shape mismatch");
  const std::size_t O = w.out_channels(), K = w.in_channels() * w.taps();
  const std::size_t HW = f.height() * f.width(), TT = f.frames();
  ConvGrads<T> g;
  g.weight = Kernel<T>(w.out_channels(), w.in_channels(), w.kt(), w.kh(), w.kw());
  if (need_input) g.input = Volume<T>(f.channels(), TT, f.height(), f.width());
  if (TT == 0 || HW == 0) return g;
  const std::size_t step = chunk_frames(TT, HW);
  std::vector<T> cols(K * step * HW);
  Eigen::Map<const RowMat<T>> W(w.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(K));
  Eigen::Map<RowMat<T>> GW(g.weight.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(K));
  for (std::size_t t0 = 0; t0 < TT; t0 += step) {
    const std::size_t nt = std::min(step, TT - t0), P = nt * HW;
    im2col(f, w.kt(), w.kh(), w.kw(), t0, nt, cols.data());
    Eigen::Map<RowMat<T>> C(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> G(gout.data() + t0 * HW, static_cast<Eigen::Index>(O),
                                                           static_cast<Eigen::Index>(P),
                                                           Eigen::OuterStride<>(static_cast<Eigen::Index>(TT * HW)));
    GW.noalias() += G * C.transpose();
    if (need_input) {
      C.noalias() = W.transpose() * G;
      col2im_add(cols.data(), w.kt(), w.kh(), w.kw(), t0, nt, g.input);
    }
  }
  return g;
}

}  // namespace ddrppg
