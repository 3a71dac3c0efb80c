#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddrppg {

enum class ErrorCode {
  invalid_argument,
  invalid_band,
  no_peak,
  zero_variance,
  zero_energy,
  layout,
  parse,
  shape_mismatch,
  singularity,
  unsupported_format,
  undefined_loss,
  config,
  ingest,
  divergence,
  empty_eval,
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_band: return "invalid-band";
    case ErrorCode::no_peak: return "no-peak";
    case ErrorCode::zero_variance: return "zero-variance";
    case ErrorCode::zero_energy: return "zero-energy";
    case ErrorCode::layout: return "layout";
    case ErrorCode::parse: return "parse";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::singularity: return "singularity";
    case ErrorCode::unsupported_format: return "unsupported-format";
    case ErrorCode::undefined_loss: return "undefined-loss";
    case ErrorCode::config: return "config";
    case ErrorCode::ingest: return "ingest";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::empty_eval: return "empty-eval";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Library-wide exception type. The code lets callers (and tests) tell error
/// classes apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ddrppg
