#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/signal/trace.hpp"

namespace ddrppg {

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void check_equal_length(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch,
          "traces differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  require(a.size() >= 2, ErrorCode::invalid_argument, "traces need at least 2 samples");
}

/// a[v - tau] with zeros outside the valid range.
inline std::vector<double> shifted(std::span<const double> a, long tau) {
  const long n = static_cast<long>(a.size());
  std::vector<double> out(a.size(), 0.0);
  for (long v = 0; v < n; ++v) {
    const long src = v - tau;
    if (src >= 0 && src < n) out[static_cast<std::size_t>(v)] = a[static_cast<std::size_t>(src)];
  }
  return out;
}

/// Sum of squared deviations, or 0 when it is indistinguishable from
/// round-off relative to the raw energy.
inline double centered_energy(std::span<const double> x, double mean) {
  double dev = 0.0, raw = 0.0;
  for (double v : x) {
    dev += (v - mean) * (v - mean);
    raw += v * v;
  }
  return dev <= 1e-26 * raw ? 0.0 : dev;
}

}  // namespace detail

/// Pearson correlation coefficient.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  detail::check_equal_length(a, b);
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = detail::centered_energy(a, ma), vb = detail::centered_energy(b, mb);
  require(va > 0.0 && vb > 0.0, ErrorCode::zero_variance, "pearson correlation of a constant trace");
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma) * (b[i] - mb);
  return cov / std::sqrt(va * vb);
}

/// 1 - Pearson(a, b), in [0, 2].
inline double negative_pearson(std::span<const double> a, std::span<const double> b) {
  return 1.0 - pearson(a, b);
}
inline double negative_pearson(const SignalTrace& a, const SignalTrace& b) {
  return negative_pearson(a.samples(), b.samples());
}

/// sum(a b) / (|a| |b|), no mean removal.
inline double normalized_correlation(std::span<const double> a, std::span<const double> b) {
  detail::check_equal_length(a, b);
  const double ea = detail::dot(a, a), eb = detail::dot(b, b);
  require(ea > 0.0 && eb > 0.0, ErrorCode::zero_energy, "normalized correlation of a zero-energy trace");
  return detail::dot(a, b) / std::sqrt(ea * eb);
}
inline double normalized_correlation(const SignalTrace& a, const SignalTrace& b) {
  return normalized_correlation(a.samples(), b.samples());
}

struct CorrelationProfile {
  std::vector<long> lags;
  std::vector<double> values;
  /// Lags whose shifted window (or the reference) carried no energy; value is 0.
  std::vector<std::uint8_t> zero_energy;
  /// Per-lag norm ratios; only filled by decomposition_profile().
  std::vector<double> alpha, beta;

  std::size_t index_of(long tau) const { return static_cast<std::size_t>(tau - lags.front()); }
  double at(long tau) const { return values[index_of(tau)]; }

  long argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
      if (values[i] > values[best]) best = i;
    return lags[best];
  }
  double max_value() const {
    double m = values.front();
    for (double v : values) m = std::max(m, v);
    return m;
  }
  double min_value() const {
    double m = values.front();
    for (double v : values) m = std::min(m, v);
    return m;
  }
  /// Value with the largest magnitude, sign kept.
  double peak() const {
    double p = 0.0;
    for (double v : values)
      if (std::abs(v) > std::abs(p)) p = v;
    return p;
  }
  double peak_abs() const { return std::abs(peak()); }
};

/// values[tau] = NC(a[v - tau], b[v]) for tau in [-(L-1), L-1], zero-padded.
inline CorrelationProfile running_correlation(std::span<const double> a, std::span<const double> b) {
  detail::check_equal_length(a, b);
  const long n = static_cast<long>(a.size());
  const double eb = detail::dot(b, b);

  CorrelationProfile prof;
  prof.lags.reserve(2 * a.size() - 1);
  prof.values.reserve(2 * a.size() - 1);
  prof.zero_energy.reserve(2 * a.size() - 1);
  for (long tau = -(n - 1); tau <= n - 1; ++tau) {
    // shifted window uses a[max(0,-tau) .. min(n, n - tau))
    const long lo = std::max(0L, -tau), hi = std::min(n, n - tau);
    double s = 0.0, ea = 0.0;
    for (long src = lo; src < hi; ++src) {
      const double av = a[static_cast<std::size_t>(src)];
      s += av * b[static_cast<std::size_t>(src + tau)];
      ea += av * av;
    }
    double value = 0.0;
    bool flagged = true;
    if (ea > 0.0 && eb > 0.0) {
      value = s / std::sqrt(ea * eb);
      flagged = false;
    }
    prof.lags.push_back(tau);
    prof.values.push_back(value);
    prof.zero_energy.push_back(flagged ? 1 : 0);
  }
  return prof;
}
inline CorrelationProfile running_correlation(const SignalTrace& a, const SignalTrace& b) {
  return running_correlation(a.samples(), b.samples());
}

struct Decomposition {
  double alpha = 0.0;
  double beta = 0.0;
  /// alpha NC(r~, n_bg) + beta NC(n~_fg, n_bg)
  double reconstructed = 0.0;
  /// NC((r + n_fg)~, n_bg) evaluated directly.
  double direct = 0.0;
};

/// Splits the running correlation of r_hat = r + n_fg against n_bg at lag tau
/// into a pulse term and an interference term weighted by norm ratios.
inline Decomposition decompose_correlation(std::span<const double> r, std::span<const double> n_fg,
                                           std::span<const double> n_bg, long tau) {
  detail::check_equal_length(r, n_fg);
  detail::check_equal_length(r, n_bg);
  const long n = static_cast<long>(r.size());
  require(tau > -n && tau < n, ErrorCode::invalid_argument, "lag outside [-(L-1), L-1]");
  const auto rs = detail::shifted(r, tau);
  const auto ns = detail::shifted(n_fg, tau);
  std::vector<double> comp(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) comp[i] = rs[i] + ns[i];

  const double e_comp = detail::dot(comp, comp);
  require(e_comp > 0.0, ErrorCode::zero_energy, "composite r + n_fg has no energy in the shifted window");
  const double e_bg = detail::dot(n_bg, n_bg);
  require(e_bg > 0.0, ErrorCode::zero_energy, "n_bg has no energy");

  const double norm_comp = std::sqrt(e_comp);
  const double er = detail::dot(rs, rs), en = detail::dot(ns, ns);
  Decomposition d;
  d.alpha = std::sqrt(er) / norm_comp;
  d.beta = std::sqrt(en) / norm_comp;
  const double nc_r = er > 0.0 ? detail::dot(rs, n_bg) / std::sqrt(er * e_bg) : 0.0;
  const double nc_n = en > 0.0 ? detail::dot(ns, n_bg) / std::sqrt(en * e_bg) : 0.0;
  d.reconstructed = d.alpha * nc_r + d.beta * nc_n;
  d.direct = detail::dot(comp, n_bg) / std::sqrt(e_comp * e_bg);
  return d;
}
inline Decomposition decompose_correlation(const SignalTrace& r, const SignalTrace& n_fg, const SignalTrace& n_bg,
                                           long tau) {
  return decompose_correlation(r.samples(), n_fg.samples(), n_bg.samples(), tau);
}

/// Running correlation of (r + n_fg) against n_bg with per-lag alpha/beta.
/// Lags where the composite window is empty are flagged.
inline CorrelationProfile decomposition_profile(std::span<const double> r, std::span<const double> n_fg,
                                                std::span<const double> n_bg) {
  detail::check_equal_length(r, n_fg);
  detail::check_equal_length(r, n_bg);
  std::vector<double> comp(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) comp[i] = r[i] + n_fg[i];
  auto prof = running_correlation(comp, n_bg);
  const long n = static_cast<long>(r.size());
  std::vector<double> pr(r.size() + 1, 0.0), pn(r.size() + 1, 0.0), pc(r.size() + 1, 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    pr[i + 1] = pr[i] + r[i] * r[i];
    pn[i + 1] = pn[i] + n_fg[i] * n_fg[i];
    pc[i + 1] = pc[i] + comp[i] * comp[i];
  }
  prof.alpha.resize(prof.lags.size(), 0.0);
  prof.beta.resize(prof.lags.size(), 0.0);
  for (std::size_t k = 0; k < prof.lags.size(); ++k) {
    const long tau = prof.lags[k];
    const auto lo = static_cast<std::size_t>(std::max(0L, -tau));
    const auto hi = static_cast<std::size_t>(std::min(n, n - tau));
    const double ec = pc[hi] - pc[lo];
    if (ec <= 0.0) continue;
    prof.alpha[k] = std::sqrt(pr[hi] - pr[lo]) / std::sqrt(ec);
    prof.beta[k] = std::sqrt(pn[hi] - pn[lo]) / std::sqrt(ec);
  }
  return prof;
}

}  // namespace ddrppg
