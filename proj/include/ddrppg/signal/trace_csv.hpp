#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "ddrppg/core/error.hpp"
#include "ddrppg/signal/trace.hpp"

namespace ddrppg {

/// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what = "number") {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size() && !s.empty(), ErrorCode::parse,
          "cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

/// Layout:
///   fs_hz,kind
///   30,rppg
///   <one sample per line>
inline void write_trace_csv(std::ostream& os, const SignalTrace& tr) {
  os << "fs_hz,kind\n" << format_double(tr.fs()) << ',' << to_string(tr.kind()) << '\n';
  for (double v : tr.samples()) os << format_double(v) << '\n';
}

inline void write_trace_csv(const std::filesystem::path& path, const SignalTrace& tr) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot write " + path.string());
  write_trace_csv(os, tr);
}

inline SignalTrace read_trace_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::parse, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "fs_hz,kind", ErrorCode::parse, "trace header must be 'fs_hz,kind'");
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::parse, "missing fs_hz,kind values");
  const auto comma = line.find(',');
  require(comma != std::string::npos, ErrorCode::parse, "malformed fs_hz,kind line");
  const double fs = parse_double(std::string_view(line).substr(0, comma), "fs_hz");
  std::string kind = line.substr(comma + 1);
  if (!kind.empty() && kind.back() == '\r') kind.pop_back();
  std::vector<double> samples;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    samples.push_back(parse_double(line, "sample"));
  }
  return SignalTrace(std::move(samples), fs, parse_trace_kind(kind));
}

inline SignalTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io, "cannot open " + path.string());
  return read_trace_csv(is);
}

}  // namespace ddrppg
