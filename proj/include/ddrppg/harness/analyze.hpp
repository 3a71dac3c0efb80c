#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/harness/dataset.hpp"
#include "ddrppg/signal/classical.hpp"
#include "ddrppg/signal/correlation.hpp"
#include "ddrppg/signal/trace_csv.hpp"

namespace ddrppg {

struct AnalyzeOptions {
  ClassicalMethod method = ClassicalMethod::green;
  /// Profiles are kept for |lag| <= max_lag_s seconds.
  double max_lag_s = 2.0;
};

/// A correlation profile cut to a lag window.
struct LagProfile {
  std::vector<long> lags;
  std::vector<double> values, alpha, beta;

  double peak() const {
    double p = 0.0;
    for (double v : values)
      if (std::abs(v) > std::abs(p)) p = v;
    return p;
  }
  double at_zero() const { return values[values.size() / 2]; }
};

struct VideoAnalysis {
  std::string name;
  /// (r_hat, n_bg): fg estimate against the mean of the bg boxes.
  LagProfile rhat_bg;
  /// (n_bg1, n_bg2): the two bg boxes against each other.
  LagProfile bg_bg;
  /// r_hat split into a pulse part and the remainder, when truth is known.
  std::optional<LagProfile> decomposition;
};

namespace analyze_detail {

inline LagProfile cut(const CorrelationProfile& p, long max_lag) {
  LagProfile out;
  for (std::size_t k = 0; k < p.lags.size(); ++k) {
    if (std::abs(p.lags[k]) > max_lag) continue;
    out.lags.push_back(p.lags[k]);
    out.values.push_back(p.values[k]);
    if (!p.alpha.empty()) {
      out.alpha.push_back(p.alpha[k]);
      out.beta.push_back(p.beta[k]);
    }
  }
  return out;
}

inline std::vector<double> region_trace(const Video& v, const Box& b, ClassicalMethod m) {
  return classical_extract(v.crop(0, v.frames(), b), m).vec();
}

}  // namespace analyze_detail

/// Running correlations of one video from classical region traces.
inline VideoAnalysis analyze_video(const DatasetVideo& v, const AnalyzeOptions& o = {}) {
  using namespace analyze_detail;
  require(v.layout.bg.size() >= 2, ErrorCode::layout, v.name + ": analysis needs two background boxes");
  const long max_lag = std::max(0L, std::lround(o.max_lag_s * v.video.fps()));
  VideoAnalysis a;
  a.name = v.name;
  const auto r_hat = region_trace(v.video, v.layout.fg, o.method);
  const auto bg1 = region_trace(v.video, v.layout.bg[0], o.method);
  const auto bg2 = region_trace(v.video, v.layout.bg[1], o.method);
  std::vector<double> bg(bg1.size());
  for (std::size_t t = 0; t < bg.size(); ++t) bg[t] = 0.5 * (bg1[t] + bg2[t]);
  a.rhat_bg = cut(running_correlation(r_hat, bg), max_lag);
  a.bg_bg = cut(running_correlation(bg1, bg2), max_lag);
  if (v.truth) {
    // Least-squares share of the true pulse in r_hat; the rest is interference.
    const auto r = demeaned(v.truth->r);
    const auto rh = demeaned(r_hat);
    const double rr = detail::dot(r, r);
    const double k = rr > 0.0 ? detail::dot(rh, r) / rr : 0.0;
    std::vector<double> pulse(r.size()), rest(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
      pulse[t] = k * r[t];
      rest[t] = rh[t] - pulse[t];
    }
    a.decomposition = cut(decomposition_profile(pulse, rest, bg), max_lag);
  }
  return a;
}

inline std::vector<VideoAnalysis> analyze_dataset(const Dataset& ds, const AnalyzeOptions& o = {}) {
  std::vector<VideoAnalysis> out;
  for (const auto& v : ds.videos) out.push_back(analyze_video(v, o));
  return out;
}

namespace analyze_detail {

inline std::string polyline(const LagProfile& p, const std::vector<double>& values, double x0, double y0, double w,
                            double h) {
  std::ostringstream os;
  const double lo = static_cast<double>(p.lags.front()), hi = static_cast<double>(p.lags.back());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = hi > lo ? x0 + w * (static_cast<double>(p.lags[k]) - lo) / (hi - lo) : x0 + w / 2;
    const double y = y0 + h * (1.0 - (values[k] + 1.0) / 2.0);
    os << (k ? " " : "") << x << ',' << y;
  }
  return os.str();
}

}  // namespace analyze_detail

/// Profiles against lag, NC axis fixed to [-1, 1].
inline std::string analysis_svg(const VideoAnalysis& a) {
  using analyze_detail::polyline;
  const double W = 640, H = 360, x0 = 50, y0 = 20, w = 560, h = 300;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\"" << h
     << "\" fill=\"none\" stroke=\"#888\"/>\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 + h / 2 << "\" x2=\"" << x0 + w << "\" y2=\"" << y0 + h / 2
     << "\" stroke=\"#ccc\"/>\n"
     << "<text x=\"" << x0 << "\" y=\"" << H - 10 << "\" font-size=\"12\">" << a.name << ": lag "
     << a.rhat_bg.lags.front() << " to " << a.rhat_bg.lags.back() << " frames, NC in [-1, 1]</text>\n";
  auto line = [&](const LagProfile& p, const std::vector<double>& v, const char* colour, const char* label, int row) {
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"" << polyline(p, v, x0, y0, w, h) << "\"/>\n"
       << "<text x=\"" << x0 + 8 << "\" y=\"" << y0 + 14 * row << "\" font-size=\"11\" fill=\"" << colour << "\">"
       << label << "</text>\n";
  };
  line(a.rhat_bg, a.rhat_bg.values, "#c0392b", "NC(r_hat, n_bg)", 1);
  line(a.bg_bg, a.bg_bg.values, "#2471a3", "NC(n_bg1, n_bg2)", 2);
  if (a.decomposition) {
    line(*a.decomposition, a.decomposition->alpha, "#27ae60", "alpha", 3);
    line(*a.decomposition, a.decomposition->beta, "#8e44ad", "beta", 4);
  }
  os << "</svg>\n";
  return os.str();
}

/// <dir>/<video>.csv and <dir>/<video>.svg per video plus <dir>/summary.csv.
inline void write_analysis(const std::filesystem::path& dir, const std::vector<VideoAnalysis>& all) {
  std::filesystem::create_directories(dir);
  std::ofstream sum(dir / "summary.csv", std::ios::binary);
  require(static_cast<bool>(sum), ErrorCode::io, "cannot write " + (dir / "summary.csv").string());
  sum << "video,peak_rhat_nbg,peak_bg1_bg2,alpha_0,beta_0\n";
  for (const auto& a : all) {
    std::ofstream os(dir / (a.name + ".csv"), std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::io, "cannot write analysis for " + a.name);
    os << "lag,rhat_nbg,bg1_bg2,alpha,beta\n";
    for (std::size_t k = 0; k < a.rhat_bg.lags.size(); ++k) {
      os << a.rhat_bg.lags[k] << ',' << format_double(a.rhat_bg.values[k]) << ','
         << format_double(a.bg_bg.values[k]) << ',';
      if (a.decomposition)
        os << format_double(a.decomposition->alpha[k]) << ',' << format_double(a.decomposition->beta[k]);
      else
        os << ',';
      os << '\n';
    }
    std::ofstream svg(dir / (a.name + ".svg"), std::ios::binary);
    svg << analysis_svg(a);
    sum << a.name << ',' << format_double(a.rhat_bg.peak()) << ',' << format_double(a.bg_bg.peak()) << ',';
    if (a.decomposition) {
      const auto mid = a.decomposition->alpha.size() / 2;
      sum << format_double(a.decomposition->alpha[mid]) << ',' << format_double(a.decomposition->beta[mid]);
    } else {
      sum << ',';
    }
    sum << '\n';
  }
}

}  // namespace ddrppg
