#pragma once

// Direct-loop reference implementations, written straight from the defining
// sums with zero padding and none of the effective-kernel algebra used by the
// library.

#include "ddrppg/core/array.hpp"

namespace oracle {

using V = ddrppg::Volume<double>;
using K = ddrppg::Kernel<double>;

inline double at_padded(const V& f, std::size_t c, long t, long y, long x) {
  if (t < 0 || y < 0 || x < 0 || t >= static_cast<long>(f.frames()) || y >= static_cast<long>(f.height()) ||
      x >= static_cast<long>(f.width()))
    return 0.0;
  return f(c, static_cast<std::size_t>(t), static_cast<std::size_t>(y), static_cast<std::size_t>(x));
}

inline double m_at(const K& m, std::size_t o, std::size_t i, std::size_t a, std::size_t b, std::size_t d) {
  return m(o, m.in_channels() == 1 ? 0 : i, a, b, d);
}

/// Sum over taps of w * f(p + p_k) * mask(p_k); mask(...) = 1 gives vanilla.
template <class Mask>
V generic(const V& f, const K& w, Mask mask) {
  const long pt = static_cast<long>(w.kt() / 2), ph = static_cast<long>(w.kh() / 2),
             pw = static_cast<long>(w.kw() / 2);
  V out(w.out_channels(), f.frames(), f.height(), f.width());
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (std::size_t t = 0; t < f.frames(); ++t)
      for (std::size_t y = 0; y < f.height(); ++y)
        for (std::size_t x = 0; x < f.width(); ++x) {
          double s = 0.0;
          for (std::size_t i = 0; i < w.in_channels(); ++i)
            for (std::size_t a = 0; a < w.kt(); ++a)
              for (std::size_t b = 0; b < w.kh(); ++b)
                for (std::size_t d = 0; d < w.kw(); ++d)
                  s += w(o, i, a, b, d) *
                       at_padded(f, i, static_cast<long>(t + a) - pt, static_cast<long>(y + b) - ph,
                                 static_cast<long>(x + d) - pw) *
                       mask(o, i, a, b, d);
          out(o, t, y, x) = s;
        }
  return out;
}

inline V vanilla(const V& f, const K& w) {
  return generic(f, w, [](auto...) { return 1.0; });
}

inline V descriptive_term(const V& f, const K& w, const K& m) {
  return generic(f, w, [&](std::size_t o, std::size_t i, std::size_t a, std::size_t b, std::size_t d) {
    return m_at(m, o, i, a, b, d);
  });
}

/// (1 - eps) * vanilla + eps * sum w (f * m)
inline V ldc(const V& f, const K& w, const K& m, double eps) {
  const V van = vanilla(f, w), desc = descriptive_term(f, w, m);
  V out(van);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (1.0 - eps) * van[k] + eps * desc[k];
  return out;
}

/// Neighbour slices contribute w * (f(p + p_k) - theta f(p)); the middle
/// slice is a plain convolution.
inline V tdc(const V& f, const K& w, double theta) {
  V out(w.out_channels(), f.frames(), f.height(), f.width());
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (std::size_t t = 0; t < f.frames(); ++t)
      for (std::size_t y = 0; y < f.height(); ++y)
        for (std::size_t x = 0; x < f.width(); ++x) {
          double s = 0.0;
          for (std::size_t i = 0; i < w.in_channels(); ++i) {
            const double centre = f(i, t, y, x);
            for (std::size_t a = 0; a < 3; ++a)
              for (std::size_t b = 0; b < 3; ++b)
                for (std::size_t d = 0; d < 3; ++d) {
                  const double v = at_padded(f, i, static_cast<long>(t + a) - 1, static_cast<long>(y + b) - 1,
                                             static_cast<long>(x + d) - 1);
                  s += w(o, i, a, b, d) * (a == 1 ? v : v - theta * centre);
                }
          }
          out(o, t, y, x) = s;
        }
  return out;
}

}  // namespace oracle
