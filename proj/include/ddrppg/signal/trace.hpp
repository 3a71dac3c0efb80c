#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddrppg/core/error.hpp"

namespace ddrppg {

enum class TraceKind { rppg, interference, raw };

constexpr std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::rppg: return "rppg";
    case TraceKind::interference: return "interference";
    case TraceKind::raw: return "raw";
  }
  return "raw";
}

inline TraceKind parse_trace_kind(std::string_view s) {
  if (s == "rppg") return TraceKind::rppg;
  if (s == "interference") return TraceKind::interference;
  if (s == "raw") return TraceKind::raw;
  fail(ErrorCode::parse, "unknown trace kind '" + std::string(s) + "'");
}

/// Uniformly sampled 1-D time series.
class SignalTrace {
 public:
  SignalTrace(std::vector<double> samples, double fs, TraceKind kind = TraceKind::raw)
      : samples_(std::move(samples)), fs_(fs), kind_(kind) {
    require(samples_.size() >= 2, ErrorCode::invalid_argument, "trace needs at least 2 samples");
    require(fs_ > 0.0 && std::isfinite(fs_), ErrorCode::invalid_argument, "sampling rate must be positive");
    for (double v : samples_)
      require(std::isfinite(v), ErrorCode::invalid_argument, "trace samples must be finite");
  }

  std::span<const double> samples() const noexcept { return samples_; }
  const std::vector<double>& vec() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double fs() const noexcept { return fs_; }
  TraceKind kind() const noexcept { return kind_; }
  double operator[](std::size_t i) const noexcept { return samples_[i]; }
  double duration() const noexcept { return static_cast<double>(samples_.size()) / fs_; }

 private:
  std::vector<double> samples_;
  double fs_;
  TraceKind kind_;
};

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline std::vector<double> demeaned(std::span<const double> x) {
  const double m = mean_of(x);
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v -= m;
  return out;
}

}  // namespace ddrppg
