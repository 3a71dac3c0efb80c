#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/signal/trace.hpp"

namespace ddrppg {

struct Band {
  double lo = 0.66;
  double hi = 4.16;
};

/// Heart-rate band: 40-250 bpm.
inline constexpr Band kHrBand{0.66, 4.16};

enum class Window { rectangular, hann };

struct PsdOptions {
  Window window = Window::rectangular;
  /// Zero-padding factor; 1 keeps the native resolution fs/N.
  std::size_t pad_factor = 1;
};

struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> power;
  Band band;
};

/// DFT restricted to the bins inside a band, with cached twiddles. Used both
/// for spectra and for the differentiable PSD inside the contrastive losses.
class BandDft {
 public:
  BandDft(std::size_t n, double fs, Band band, std::size_t pad_factor = 1) : n_(n), fs_(fs), band_(band) {
    require(n >= 2, ErrorCode::invalid_argument, "DFT length must be at least 2");
    require(pad_factor >= 1, ErrorCode::invalid_argument, "pad factor must be >= 1");
    require(fs > 0.0, ErrorCode::invalid_argument, "sampling rate must be positive");
    require(band.lo >= 0.0 && band.hi <= fs / 2.0 + 1e-12 && band.lo <= band.hi, ErrorCode::invalid_band,
            "band [" + std::to_string(band.lo) + ", " + std::to_string(band.hi) + "] outside [0, fs/2]");
    const std::size_t padded = n * pad_factor;
    const double df = fs / static_cast<double>(padded);
    for (std::size_t k = 0; k <= padded / 2; ++k) {
      const double f = static_cast<double>(k) * df;
      if (f >= band.lo - 1e-12 && f <= band.hi + 1e-12) {
        bins_.push_back(k);
        freqs_.push_back(f);
      }
    }
    cos_.resize(bins_.size() * n);
    sin_.resize(bins_.size() * n);
    for (std::size_t b = 0; b < bins_.size(); ++b) {
      for (std::size_t t = 0; t < n; ++t) {
        // Reduce the phase index exactly before converting to an angle.
        const std::size_t idx = (bins_[b] * t) % padded;
        const double a = 2.0 * std::numbers::pi * static_cast<double>(idx) / static_cast<double>(padded);
        cos_[b * n + t] = std::cos(a);
        sin_[b * n + t] = std::sin(a);
      }
    }
  }

  std::size_t length() const noexcept { return n_; }
  std::size_t bins() const noexcept { return bins_.size(); }
  const std::vector<double>& freqs() const noexcept { return freqs_; }
  Band band() const noexcept { return band_; }

  /// |X_k|^2 for every in-band bin of the (already prepared) signal x.
  std::vector<double> power(std::span<const double> x) const {
    require(x.size() == n_, ErrorCode::shape_mismatch, "DFT input length mismatch");
    std::vector<double> p(bins_.size());
    for (std::size_t b = 0; b < bins_.size(); ++b) {
      double re = 0.0, im = 0.0;
      const double* c = &cos_[b * n_];
      const double* s = &sin_[b * n_];
      for (std::size_t t = 0; t < n_; ++t) {
        re += x[t] * c[t];
        im -= x[t] * s[t];
      }
      p[b] = re * re + im * im;
    }
    return p;
  }

  /// Vector-Jacobian product of power(): given dL/dP returns dL/dx.
  std::vector<double> power_vjp(std::span<const double> x, std::span<const double> grad_p) const {
    std::vector<double> g(n_, 0.0);
    for (std::size_t b = 0; b < bins_.size(); ++b) {
      if (grad_p[b] == 0.0) continue;
      double re = 0.0, im = 0.0;
      const double* c = &cos_[b * n_];
      const double* s = &sin_[b * n_];
      for (std::size_t t = 0; t < n_; ++t) {
        re += x[t] * c[t];
        im -= x[t] * s[t];
      }
      const double k = 2.0 * grad_p[b];
      for (std::size_t t = 0; t < n_; ++t) g[t] += k * (re * c[t] - im * s[t]);
    }
    return g;
  }

 private:
  std::size_t n_;
  double fs_;
  Band band_;
  std::vector<std::size_t> bins_;
  std::vector<double> freqs_;
  std::vector<double> cos_, sin_;
};

inline std::vector<double> window_weights(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::hann && n > 1)
    for (std::size_t t = 0; t < n; ++t)
      out[t] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n - 1)));
  return out;
}

/// Periodogram of the mean-removed trace restricted to `band`. Power is the
/// unscaled squared DFT magnitude, so the in-band total equals the in-band
/// sum of |X_k|^2.
inline Spectrum psd(const SignalTrace& trace, Band band = kHrBand, const PsdOptions& opts = {}) {
  BandDft dft(trace.size(), trace.fs(), band, opts.pad_factor);
  auto x = demeaned(trace.samples());
  if (opts.window != Window::rectangular) {
    const auto w = window_weights(opts.window, x.size());
    for (std::size_t t = 0; t < x.size(); ++t) x[t] *= w[t];
  }
  return Spectrum{dft.freqs(), dft.power(x), band};
}

/// 60 x the in-band argmax frequency. Ties resolve to the lowest frequency.
inline double estimate_hr(const Spectrum& spec) {
  std::size_t best = spec.power.size();
  double best_p = 0.0;
  for (std::size_t i = 0; i < spec.power.size(); ++i) {
    const double f = spec.freqs[i];
    if (f < spec.band.lo - 1e-12 || f > spec.band.hi + 1e-12) continue;
    if (spec.power[i] > best_p) {
      best_p = spec.power[i];
      best = i;
    }
  }
  require(best < spec.power.size(), ErrorCode::no_peak, "no in-band spectral peak");
  return 60.0 * spec.freqs[best];
}

inline double estimate_hr(const SignalTrace& trace, Band band = kHrBand, const PsdOptions& opts = {}) {
  return estimate_hr(psd(trace, band, opts));
}

/// Frequency of the in-band spectral peak, in Hz.
inline double peak_frequency(const SignalTrace& trace, Band band = kHrBand, const PsdOptions& opts = {}) {
  return estimate_hr(trace, band, opts) / 60.0;
}

}  // namespace ddrppg
