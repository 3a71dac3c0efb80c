#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/harness/dataset.hpp"
#include "ddrppg/harness/metrics.hpp"
#include "ddrppg/net/network.hpp"
#include "ddrppg/signal/classical.hpp"
#include "ddrppg/signal/spectrum.hpp"

namespace ddrppg {

struct EvalOptions {
  double window_s = 30.0;
  /// 0 takes the whole fg box.
  std::size_t crop_height = 64, crop_width = 64;
  /// Score r_hat instead of the de-interfered r.
  bool use_r_hat = false;
  Band band = kHrBand;
};

struct EvalWindow {
  std::string video;
  std::size_t t0 = 0, frames = 0;
  double hr_pred = 0.0, hr_true = 0.0;
  /// Spectral peak of the interference estimate; NaN when there is none.
  double n_peak_hz = std::nan("");
};

struct EvalReport {
  std::vector<EvalWindow> windows;
  HrMetrics metrics;
  std::vector<std::string> warnings;
};

/// Pulse estimate of one window plus an optional interference estimate.
struct WindowTraces {
  SignalTrace pulse;
  std::optional<SignalTrace> interference;
};

using WindowEstimator = std::function<WindowTraces(const Clip&)>;

/// Centered crop of the fg box; a zero size keeps that extent of the box.
inline Box center_crop(const Box& fg, std::size_t h, std::size_t w) {
  if (h == 0) h = static_cast<std::size_t>(fg.height);
  if (w == 0) w = static_cast<std::size_t>(fg.width);
  require(h <= static_cast<std::size_t>(fg.height) && w <= static_cast<std::size_t>(fg.width),
          ErrorCode::invalid_argument,
          "eval crop " + std::to_string(h) + "x" + std::to_string(w) + " exceeds the fg box");
  return Box{fg.x + (fg.width - static_cast<int>(w)) / 2, fg.y + (fg.height - static_cast<int>(h)) / 2,
             static_cast<int>(w), static_cast<int>(h)};
}

struct NetworkTraces {
  SignalTrace n, r_hat, r;
};

inline NetworkTraces network_traces(const DdNetwork<float>& net, const Clip& clip) {
  const auto u = net.fg_unit(clip, false, true);
  auto tr = [&](const std::vector<float>& v, TraceKind k) {
    return SignalTrace(std::vector<double>(v.begin(), v.end()), clip.fps(), k);
  };
  return {tr(u.n, TraceKind::interference), tr(u.r_hat, TraceKind::rppg), tr(u.r, TraceKind::rppg)};
}

/// Scores non-overlapping windows of every video with ground truth. Videos
/// shorter than one window, or without truth, are skipped with a warning.
inline EvalReport evaluate_windows(const Dataset& ds, const EvalOptions& o, const WindowEstimator& estimate) {
  require(o.window_s > 0.0, ErrorCode::invalid_argument, "evaluation window must be positive");
  EvalReport rep;
  std::vector<double> pred, truth;
  for (const auto& v : ds.videos) {
    const auto win = static_cast<std::size_t>(std::lround(o.window_s * v.video.fps()));
    if (win < 2 || v.video.frames() < win) {
      rep.warnings.push_back(v.name + ": " + std::to_string(v.video.frames()) + " frames, shorter than the " +
                             std::to_string(win) + "-frame window; skipped");
      continue;
    }
    if (!v.truth) {
      rep.warnings.push_back(v.name + ": no ground truth; skipped");
      continue;
    }
    const Box crop = center_crop(v.layout.fg, o.crop_height, o.crop_width);
    for (std::size_t t0 = 0; t0 + win <= v.video.frames(); t0 += win) {
      const auto traces = estimate(v.video.crop(t0, win, crop));
      EvalWindow w;
      w.video = v.name;
      w.t0 = t0;
      w.frames = win;
      try {
        w.hr_pred = estimate_hr(traces.pulse, o.band);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::no_peak) throw;
        w.hr_pred = 0.0;
        rep.warnings.push_back(v.name + " @" + std::to_string(t0) + ": flat pulse estimate, scored as 0 bpm");
      }
      w.hr_true = v.truth->hr_bpm;
      if (traces.interference) {
        try {
          w.n_peak_hz = peak_frequency(*traces.interference, o.band);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::no_peak) throw;
        }
      }
      pred.push_back(w.hr_pred);
      truth.push_back(w.hr_true);
      rep.windows.push_back(w);
    }
  }
  require(!rep.windows.empty(), ErrorCode::empty_eval, "every video was skipped; nothing to evaluate");
  rep.metrics = hr_metrics(pred, truth);
  return rep;
}

inline EvalReport evaluate(const DdNetwork<float>& net, const Dataset& ds, const EvalOptions& o = {}) {
  return evaluate_windows(ds, o, [&](const Clip& clip) {
    auto t = network_traces(net, clip);
    return WindowTraces{o.use_r_hat ? t.r_hat : t.r, t.n};
  });
}

inline EvalReport evaluate_classical(ClassicalMethod method, const Dataset& ds, const EvalOptions& o = {}) {
  return evaluate_windows(ds, o, [&](const Clip& clip) { return WindowTraces{classical_extract(clip, method), {}}; });
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : r.windows)
    w.push_back({{"video", x.video},
                 {"t0", x.t0},
                 {"frames", x.frames},
                 {"hr_pred", x.hr_pred},
                 {"hr_true", x.hr_true},
                 {"n_peak_hz", std::isnan(x.n_peak_hz) ? nlohmann::json(nullptr) : nlohmann::json(x.n_peak_hz)}});
  return {{"mae", r.metrics.mae},
          {"rmse", r.metrics.rmse},
          {"r", r.metrics.r},
          {"windows", w},
          {"warnings", r.warnings}};
}

}  // namespace ddrppg
