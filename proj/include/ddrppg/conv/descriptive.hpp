#pragma once

#include <cmath>
#include <string>

#include "ddrppg/conv/conv3d.hpp"
#include "ddrppg/core/array.hpp"
#include "ddrppg/core/error.hpp"

namespace ddrppg {

// Descriptive convolutions are linear in the kernel, so each one is a plain
// convolution with an effective kernel:
//
//   LDC:  (1-e) sum w f + e sum w (f m)  =  sum [w (1 + e (m - 1))] f
//   TDC:  neighbour slices use f(p+p_k) - theta f(p), which moves
//         -theta (sum w_{t-1} + sum w_{t+1}) onto the centre tap.
//
// Gradients w.r.t. f come from conv3d_backward on the effective kernel; the
// kernel-side chain rules are below.

/// Weights, descriptor and mixing scalars of one descriptive layer. The
/// descriptor m is either per filter, shape (out, 1, kt, kh, kw), or per
/// (out, in) pair, shape (out, in, kt, kh, kw).
template <class T>
struct DescriptorKernel {
  Kernel<T> w;
  Kernel<T> m;
  T epsilon = T(0.7);
  T theta = T(0);
};

namespace desc_detail {

inline void check_unit(double v, const char* name) {
  require(v >= 0.0 && v <= 1.0 && std::isfinite(v), ErrorCode::invalid_argument,
          std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
}

template <class T>
void check_descriptor(const Kernel<T>& w, const Kernel<T>& m) {
  require(m.out_channels() == w.out_channels() && (m.in_channels() == 1 || m.in_channels() == w.in_channels()) &&
              m.kt() == w.kt() && m.kh() == w.kh() && m.kw() == w.kw(),
          ErrorCode::shape_mismatch, "descriptor shape " + m.shape_string() + " incompatible with kernel " +
                                         w.shape_string());
}

/// Index into m for kernel tap (o, i, tap) honoring the broadcast layout.
template <class T>
std::size_t m_index(const Kernel<T>& m, std::size_t o, std::size_t i, std::size_t tap) {
  const std::size_t mi = m.in_channels() == 1 ? 0 : i;
  return (o * m.in_channels() + mi) * m.taps() + tap;
}

}  // namespace desc_detail

/// All-ones descriptor (exactly vanilla behaviour for any epsilon).
template <class T>
Kernel<T> ones_descriptor(const Kernel<T>& w, bool per_filter = true) {
  return Kernel<T>(w.out_channels(), per_filter ? 1 : w.in_channels(), w.kt(), w.kh(), w.kw(), T(1));
}

template <class T>
Kernel<T> ldc_effective_kernel(const Kernel<T>& w, const Kernel<T>& m, T epsilon) {
  desc_detail::check_unit(static_cast<double>(epsilon), "epsilon");
  desc_detail::check_descriptor(w, m);
  Kernel<T> eff(w.out_channels(), w.in_channels(), w.kt(), w.kh(), w.kw());
  const std::size_t taps = w.taps();
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (std::size_t i = 0; i < w.in_channels(); ++i)
      for (std::size_t k = 0; k < taps; ++k) {
        const std::size_t wi = (o * w.in_channels() + i) * taps + k;
        const T mv = m[desc_detail::m_index(m, o, i, k)];
        eff[wi] = w[wi] + epsilon * w[wi] * (mv - T(1));
      }
  return eff;
}

template <class T>
Kernel<T> tdc_effective_kernel(const Kernel<T>& w, T theta) {
  desc_detail::check_unit(static_cast<double>(theta), "theta");
  require(w.kt() == 3, ErrorCode::shape_mismatch, "TDC needs three temporal slices");
  Kernel<T> eff = w;
  const std::size_t plane = w.kh() * w.kw(), centre = plane + (w.kh() / 2) * w.kw() + w.kw() / 2;
  for (std::size_t oi = 0; oi < w.out_channels() * w.in_channels(); ++oi) {
    const T* k = w.data() + oi * w.taps();
    T side = T(0);
    for (std::size_t p = 0; p < plane; ++p) side += k[p] + k[2 * plane + p];
    eff[oi * w.taps() + centre] -= theta * side;
  }
  return eff;
}

/// 2-D LDC applied frame by frame; w has shape (out, in, 1, 3, 3).
template <class T>
Volume<T> ldc2d_forward(const Volume<T>& f, const Kernel<T>& w, const Kernel<T>& m, T epsilon) {
  require(w.kt() == 1, ErrorCode::shape_mismatch, "2-D LDC kernel must have a single temporal tap");
  return conv3d(f, ldc_effective_kernel(w, m, epsilon));
}

template <class T>
Volume<T> tdc_forward(const Volume<T>& f, const Kernel<T>& w, T theta) {
  return conv3d(f, tdc_effective_kernel(w, theta));
}

template <class T>
Volume<T> ldc3d_forward(const Volume<T>& f, const Kernel<T>& w, const Kernel<T>& m, T epsilon) {
  return conv3d(f, ldc_effective_kernel(w, m, epsilon));
}

/// Descriptor that turns 3DLDC into TDC with theta = epsilon: ones everywhere
/// except the centre of the middle slice, which is 1 + w_s with
///   w_s = -(sum w_{t-1} + sum w_{t+1}) / w_centre
/// evaluated per (out, in) pair.
template <class T>
Kernel<T> tdc_descriptor(const Kernel<T>& w) {
  require(w.kt() == 3, ErrorCode::shape_mismatch, "TDC descriptor needs three temporal slices");
  Kernel<T> m(w.out_channels(), w.in_channels(), w.kt(), w.kh(), w.kw(), T(1));
  const std::size_t plane = w.kh() * w.kw(), centre = plane + (w.kh() / 2) * w.kw() + w.kw() / 2;
  for (std::size_t oi = 0; oi < w.out_channels() * w.in_channels(); ++oi) {
    const T* k = w.data() + oi * w.taps();
    const T wc = k[centre];
    require(wc != T(0), ErrorCode::singularity,
            "centre weight is zero for filter pair " + std::to_string(oi) + "; w_s is undefined");
    T side = T(0);
    for (std::size_t p = 0; p < plane; ++p) side += k[p] + k[2 * plane + p];
    m[oi * w.taps() + centre] = T(1) - side / wc;
  }
  return m;
}

template <class T>
struct LdcKernelGrads {
  Kernel<T> w;
  Kernel<T> m;
  T epsilon = T(0);
};

/// Chain rule from dL/dw_eff to (w, m, epsilon).
template <class T>
LdcKernelGrads<T> ldc_kernel_backward(const Kernel<T>& w, const Kernel<T>& m, T epsilon, const Kernel<T>& g_eff) {
  desc_detail::check_descriptor(w, m);
  require(g_eff.same_shape(w), ErrorCode::shape_mismatch, "effective-kernel gradient shape mismatch");
  LdcKernelGrads<T> g{Kernel<T>(w.out_channels(), w.in_channels(), w.kt(), w.kh(), w.kw()),
                      Kernel<T>(m.out_channels(), m.in_channels(), m.kt(), m.kh(), m.kw()), T(0)};
  const std::size_t taps = w.taps();
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (std::size_t i = 0; i < w.in_channels(); ++i)
      for (std::size_t k = 0; k < taps; ++k) {
        const std::size_t wi = (o * w.in_channels() + i) * taps + k;
        const std::size_t mi = desc_detail::m_index(m, o, i, k);
        const T ge = g_eff[wi];
        g.w[wi] = ge * (T(1) + epsilon * (m[mi] - T(1)));
        g.m[mi] += ge * epsilon * w[wi];
        g.epsilon += ge * w[wi] * (m[mi] - T(1));
      }
  return g;
}

template <class T>
struct TdcKernelGrads {
  Kernel<T> w;
  T theta = T(0);
};

template <class T>
TdcKernelGrads<T> tdc_kernel_backward(const Kernel<T>& w, T theta, const Kernel<T>& g_eff) {
  require(g_eff.same_shape(w), ErrorCode::shape_mismatch, "effective-kernel gradient shape mismatch");
  TdcKernelGrads<T> g{g_eff, T(0)};
  const std::size_t plane = w.kh() * w.kw(), centre = plane + (w.kh() / 2) * w.kw() + w.kw() / 2;
  for (std::size_t oi = 0; oi < w.out_channels() * w.in_channels(); ++oi) {
    const T gc = g_eff[oi * w.taps() + centre];
    const T* k = w.data() + oi * w.taps();
    T side = T(0);
    for (std::size_t p = 0; p < plane; ++p) {
      side += k[p] + k[2 * plane + p];
      g.w[oi * w.taps() + p] -= theta * gc;
      g.w[oi * w.taps() + 2 * plane + p] -= theta * gc;
    }
    g.theta -= gc * side;
  }
  return g;
}

template <class T>
struct LdcGrads {
  Volume<T> input;
  Kernel<T> w;
  Kernel<T> m;
  T epsilon = T(0);
};

/// Full backward of ldc2d_forward / ldc3d_forward.
template <class T>
LdcGrads<T> ldc_backward(const Volume<T>& f, const Kernel<T>& w, const Kernel<T>& m, T epsilon,
                         const Volume<T>& gout, bool need_input = true) {
  const Kernel<T> eff = ldc_effective_kernel(w, m, epsilon);
  auto cg = conv3d_backward(f, eff, gout, need_input);
  auto kg = ldc_kernel_backward(w, m, epsilon, cg.weight);
  return {std::move(cg.input), std::move(kg.w), std::move(kg.m), kg.epsilon};
}

template <class T>
struct TdcGrads {
  Volume<T> input;
  Kernel<T> w;
  T theta = T(0);
};

template <class T>
TdcGrads<T> tdc_backward(const Volume<T>& f, const Kernel<T>& w, T theta, const Volume<T>& gout,
                         bool need_input = true) {
  auto cg = conv3d_backward(f, tdc_effective_kernel(w, theta), gout, need_input);
  auto kg = tdc_kernel_backward(w, theta, cg.weight);
  return {std::move(cg.input), std::move(kg.w), kg.theta};
}

}  // namespace ddrppg
