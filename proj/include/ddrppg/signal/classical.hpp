#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/signal/trace.hpp"

namespace ddrppg {

/// Non-learning extractors. `green` is the raw demeaned green mean; it keeps
/// every additive disturbance and serves as the interference-carrying probe.
enum class ClassicalMethod { pos, chrom, green };

constexpr std::string_view to_string(ClassicalMethod m) {
  switch (m) {
    case ClassicalMethod::pos: return "pos";
    case ClassicalMethod::chrom: return "chrom";
    case ClassicalMethod::green: return "green";
  }
  return "pos";
}

inline ClassicalMethod parse_classical_method(std::string_view s) {
  if (s == "pos") return ClassicalMethod::pos;
  if (s == "chrom") return ClassicalMethod::chrom;
  if (s == "green") return ClassicalMethod::green;
  fail(ErrorCode::parse, "unknown classical method '" + std::string(s) + "'");
}

/// Per-frame channel sums in fixed point (2^-24 quanta). Integer sums make the
/// spatial mean independent of pixel order, so rotated or flipped clips give
/// bit-identical traces.
struct FixedMeans {
  static constexpr double kScale = 16777216.0;
  std::vector<std::array<std::int64_t, 3>> sums;
  std::int64_t count = 0;

  double mean(std::size_t t, std::size_t c) const {
    return static_cast<double>(sums[t][c]) / (static_cast<double>(count) * kScale);
  }
};

inline FixedMeans fixed_channel_sums(const Clip& clip) {
  require(clip.channels() == 3, ErrorCode::unsupported_format,
          "classical extraction needs 3 color channels, got " + std::to_string(clip.channels()));
  require(clip.frames() >= 2, ErrorCode::invalid_argument, "classical extraction needs at least 2 frames");
  require(clip.height() > 0 && clip.width() > 0, ErrorCode::invalid_argument, "empty clip");
  FixedMeans fm;
  fm.count = static_cast<std::int64_t>(clip.height() * clip.width());
  fm.sums.assign(clip.frames(), {0, 0, 0});
  const auto& d = clip.storage();
  const std::size_t fsz = clip.frame_size();
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    const float* p = d.data() + t * fsz;
    auto& s = fm.sums[t];
    for (std::size_t i = 0; i < fsz; i += 3) {
      s[0] += std::llround(static_cast<double>(p[i]) * FixedMeans::kScale);
      s[1] += std::llround(static_cast<double>(p[i + 1]) * FixedMeans::kScale);
      s[2] += std::llround(static_cast<double>(p[i + 2]) * FixedMeans::kScale);
    }
  }
  return fm;
}

namespace classical_detail {

inline double sd(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline void subtract_mean(std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  for (auto& v : x) v -= m;
}

/// Window-normalized channel value C(t) / mean_window(C), formed as a ratio of
/// exact integers so a constant window yields exactly 1.
inline std::array<std::vector<double>, 3> normalized_window(const FixedMeans& fm, std::size_t start, std::size_t len) {
  std::array<std::vector<double>, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    std::int64_t total = 0;
    for (std::size_t t = start; t < start + len; ++t) total += fm.sums[t][c];
    out[c].resize(len);
    for (std::size_t k = 0; k < len; ++k) {
      const double num = static_cast<double>(fm.sums[start + k][c]) * static_cast<double>(len);
      out[c][k] = total != 0 ? num / static_cast<double>(total) : 0.0;
    }
  }
  return out;
}

inline std::size_t window_length(double fs, std::size_t n) {
  const auto l = static_cast<std::size_t>(std::ceil(1.6 * fs));
  return std::clamp<std::size_t>(l, 2, n);
}

inline std::vector<double> pos(const FixedMeans& fm, double fs) {
  const std::size_t n = fm.sums.size();
  const std::size_t l = window_length(fs, n);
  std::vector<double> h(n, 0.0);
  for (std::size_t start = 0; start + l <= n; ++start) {
    const auto cn = normalized_window(fm, start, l);
    std::vector<double> s1(l), s2(l);
    for (std::size_t k = 0; k < l; ++k) {
      s1[k] = cn[1][k] - cn[2][k];
      s2[k] = -2.0 * cn[0][k] + cn[1][k] + cn[2][k];
    }
    const double sig2 = sd(s2);
    const double alpha = sig2 > 0.0 ? sd(s1) / sig2 : 0.0;
    std::vector<double> p(l);
    for (std::size_t k = 0; k < l; ++k) p[k] = s1[k] + alpha * s2[k];
    subtract_mean(p);
    for (std::size_t k = 0; k < l; ++k) h[start + k] += p[k];
  }
  return h;
}

inline std::vector<double> chrom(const FixedMeans& fm, double fs) {
  const std::size_t n = fm.sums.size();
  std::size_t l = window_length(fs, n);
  if (l % 2 && l > 2) --l;
  const std::size_t hop = l / 2;
  std::vector<double> win(l);
  for (std::size_t k = 0; k < l; ++k)
    win[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(l)));
  std::vector<double> out(n, 0.0);
  for (std::size_t start = 0; start + l <= n; start += hop) {
    const auto cn = normalized_window(fm, start, l);
    std::vector<double> x(l), y(l);
    for (std::size_t k = 0; k < l; ++k) {
      x[k] = 3.0 * cn[0][k] - 2.0 * cn[1][k];
      y[k] = 1.5 * cn[0][k] + cn[1][k] - 1.5 * cn[2][k];
    }
    const double sy = sd(y);
    const double alpha = sy > 0.0 ? sd(x) / sy : 0.0;
    std::vector<double> s(l);
    for (std::size_t k = 0; k < l; ++k) s[k] = x[k] - alpha * y[k];
    subtract_mean(s);
    for (std::size_t k = 0; k < l; ++k) out[start + k] += s[k] * win[k];
  }
  return out;
}

inline std::vector<double> green(const FixedMeans& fm) {
  const std::size_t n = fm.sums.size();
  std::int64_t total = 0;
  for (const auto& s : fm.sums) total += s[1];
  const double denom = static_cast<double>(fm.count) * FixedMeans::kScale * static_cast<double>(n);
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t)
    out[t] = static_cast<double>(fm.sums[t][1] * static_cast<std::int64_t>(n) - total) / denom;
  return out;
}

}  // namespace classical_detail

/// Pulse trace of length T from the spatially averaged colour channels.
inline SignalTrace classical_extract(const Clip& clip, ClassicalMethod method) {
  const auto fm = fixed_channel_sums(clip);
  switch (method) {
    case ClassicalMethod::pos: return {classical_detail::pos(fm, clip.fps()), clip.fps(), TraceKind::rppg};
    case ClassicalMethod::chrom: return {classical_detail::chrom(fm, clip.fps()), clip.fps(), TraceKind::rppg};
    case ClassicalMethod::green: return {classical_detail::green(fm), clip.fps(), TraceKind::raw};
  }
  fail(ErrorCode::invalid_argument, "unknown classical method");
}

}  // namespace ddrppg
