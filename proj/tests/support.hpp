#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/array.hpp"
#include "ddrppg/core/rng.hpp"

namespace testing {

/// Error code thrown by f; throws std::logic_error when nothing is thrown.
template <class F>
ddrppg::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const ddrppg::Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a ddrppg::Error");
}

inline std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t)
    out[t] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / fs + phase);
  return out;
}

inline std::vector<double> gaussian(std::uint64_t seed, std::size_t n, double scale = 1.0) {
  ddrppg::Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = scale * rng.normal();
  return out;
}

inline std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

/// Plain O(N^2) DFT power at bin k of an n * pad point transform.
inline double dft_power(const std::vector<double>& x, std::size_t k, std::size_t padded) {
  std::complex<double> s = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t)
    s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(padded));
  return std::norm(s);
}

template <class T>
ddrppg::Volume<T> random_volume(std::uint64_t seed, std::size_t c, std::size_t t, std::size_t h, std::size_t w,
                                double scale = 1.0) {
  ddrppg::Rng rng(seed);
  ddrppg::Volume<T> v(c, t, h, w);
  for (auto& x : v.storage()) x = static_cast<T>(scale * rng.uniform(-1.0, 1.0));
  return v;
}

template <class T>
ddrppg::Kernel<T> random_kernel(std::uint64_t seed, std::size_t o, std::size_t i, std::size_t kt, std::size_t kh,
                                std::size_t kw, double scale = 1.0) {
  ddrppg::Rng rng(seed);
  ddrppg::Kernel<T> k(o, i, kt, kh, kw);
  for (auto& x : k.storage()) x = static_cast<T>(scale * rng.uniform(-1.0, 1.0));
  return k;
}

/// Skin-tone clip with a pulse added along a green-heavy colour mix.
inline ddrppg::Clip pulse_clip(std::uint64_t seed, std::size_t frames, std::size_t size, double hr_bpm,
                               double fps = 30.0, double amp = 0.01) {
  ddrppg::Rng rng(seed);
  ddrppg::Clip clip(frames, size, size, 3, fps);
  const double base[3] = {0.60, 0.45, 0.35};
  const double mix[3] = {0.33, 0.77, 0.53};
  std::vector<double> tex(size * size * 3);
  for (auto& v : tex) v = rng.uniform(-0.05, 0.05);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t t = 0; t < frames; ++t) {
    const double p = amp * std::sin(2.0 * std::numbers::pi * hr_bpm / 60.0 * static_cast<double>(t) / fps + phase);
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          clip.at(t, y, x, c) = static_cast<float>(base[c] + tex[(y * size + x) * 3 + c] + mix[c] * p);
  }
  return clip;
}

/// Relative error with a floor so tiny gradients compare absolutely.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of a scalar function with respect to x[i].
inline double central_diff(const std::function<double()>& f, double& x, double h) {
  const double keep = x;
  x = keep + h;
  const double up = f();
  x = keep - h;
  const double down = f();
  x = keep;
  return (up - down) / (2.0 * h);
}

}  // namespace testing
