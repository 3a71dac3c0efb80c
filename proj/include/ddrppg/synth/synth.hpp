#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddrppg/clip/regions.hpp"
#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"
#include "ddrppg/signal/trace.hpp"
#include "ddrppg/signal/trace_csv.hpp"

namespace ddrppg {

/// Pulse colour direction: strongest in green.
inline constexpr std::array<double, 3> kPulseMix = {0.33, 0.77, 0.53};
inline constexpr std::array<double, 3> kSkinTone = {0.60, 0.45, 0.35};

struct PulseSpec {
  double hr_bpm = 72.0;
  double amplitude = 0.01;
  double harmonic_ratio = 0.5;
  double phase = 0.0;
};

enum class InterferenceKind { periodic_flicker, illumination_drift, blockiness, translation_motion, expression_warp };
enum class SpatialProfile { uniform, gradient };
enum class AppliesTo { fg, bg, both };

inline std::string to_string(InterferenceKind k) {
  switch (k) {
    case InterferenceKind::periodic_flicker: return "periodic_flicker";
    case InterferenceKind::illumination_drift: return "illumination_drift";
    case InterferenceKind::blockiness: return "blockiness";
    case InterferenceKind::translation_motion: return "translation_motion";
    case InterferenceKind::expression_warp: return "expression_warp";
  }
  return "?";
}

inline InterferenceKind parse_interference_kind(const std::string& s) {
  for (auto k : {InterferenceKind::periodic_flicker, InterferenceKind::illumination_drift, InterferenceKind::blockiness,
                 InterferenceKind::translation_motion, InterferenceKind::expression_warp})
    if (to_string(k) == s) return k;
  fail(ErrorCode::invalid_argument, "unknown interference kind '" + s + "'");
}

/// Meaning of `frequency_hz` and `amplitude` per kind:
///   periodic_flicker    tone frequency, intensity amplitude
///   illumination_drift  unused (components below 0.25 Hz), peak intensity
///   blockiness          re-quantisation cadence, quantisation step
///   translation_motion  sway frequency, shift in pixels
///   expression_warp     burst frequency, peak stretch of the lower fg half
struct InterferenceSpec {
  InterferenceKind kind = InterferenceKind::periodic_flicker;
  double frequency_hz = 0.9;
  double amplitude = 0.03;
  SpatialProfile profile = SpatialProfile::uniform;
  /// Gradient profile weight: 0.5 + slope * (x - cx) / (W / 2).
  double slope = 1.0;
  AppliesTo applies_to = AppliesTo::both;
  std::array<double, 3> tint = {1.0, 1.0, 1.0};
};

struct SceneSpec {
  std::size_t height = 20, width = 56;
  double fps = 30.0;
  double duration_s = 30.0;
  Box fg{22, 4, 12, 12};
  PulseSpec pulse;
  std::vector<InterferenceSpec> interference;
  std::uint64_t seed = 0;
  /// Standard deviation of i.i.d. Gaussian camera noise per sample. Not part
  /// of the interference truth.
  double sensor_noise = 0.0;
  /// H * W * 3 static intensities; generated from the seed when empty.
  std::vector<float> base;

  std::size_t frames() const { return static_cast<std::size_t>(std::llround(duration_s * fps)); }
};

inline SignalTrace make_pulse(const PulseSpec& s, std::size_t n, double fps) {
  require(s.hr_bpm >= 40.0 && s.hr_bpm <= 250.0, ErrorCode::invalid_argument,
          "heart rate " + std::to_string(s.hr_bpm) + " bpm outside [40, 250]");
  const double f = s.hr_bpm / 60.0;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double a = 2.0 * std::numbers::pi * f * static_cast<double>(t) / fps;
    x[t] = s.amplitude * std::sin(a + s.phase) + s.amplitude * s.harmonic_ratio * std::sin(2.0 * a + 2.0 * s.phase);
  }
  return SignalTrace(std::move(x), fps, TraceKind::rppg);
}

/// Temporal driver of one interference. `secondary` carries the vertical
/// shift of translation_motion and is empty otherwise.
struct InterferenceSignal {
  SignalTrace trace;
  std::vector<double> secondary;
};

inline InterferenceSignal make_interference(const InterferenceSpec& s, std::size_t n, double fps, std::uint64_t seed) {
  require(n >= 2, ErrorCode::invalid_argument, "interference needs at least 2 samples");
  Rng rng(derive_seed(seed, {0x1e7}));
  const double tau = 2.0 * std::numbers::pi;
  std::vector<double> x(n, 0.0), y;
  auto time = [&](std::size_t t) { return static_cast<double>(t) / fps; };
  switch (s.kind) {
    case InterferenceKind::periodic_flicker: {
      require(s.frequency_hz > 0.0 && s.frequency_hz < fps / 2.0, ErrorCode::invalid_argument,
              "flicker frequency outside (0, fs/2)");
      const double ph = rng.uniform(0.0, tau);
      for (std::size_t t = 0; t < n; ++t) x[t] = s.amplitude * std::sin(tau * s.frequency_hz * time(t) + ph);
      break;
    }
    case InterferenceKind::illumination_drift: {
      std::array<double, 3> f{}, w{}, ph{};
      double wsum = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        f[k] = rng.uniform(0.05, 0.2);
        w[k] = rng.uniform(0.3, 1.0);
        ph[k] = rng.uniform(0.0, tau);
        wsum += w[k];
      }
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < 3; ++k) x[t] += s.amplitude * w[k] / wsum * std::sin(tau * f[k] * time(t) + ph[k]);
      break;
    }
    case InterferenceKind::blockiness: {
      require(s.frequency_hz > 0.0, ErrorCode::invalid_argument, "blockiness cadence must be positive");
      const double ph = rng.uniform(0.0, 1.0);
      for (std::size_t t = 0; t < n; ++t) {
        const double c = s.frequency_hz * time(t) + ph;
        x[t] = (c - std::floor(c)) < 0.5 ? 1.0 : 0.0;
      }
      break;
    }
    case InterferenceKind::translation_motion: {
      const double p1 = rng.uniform(0.0, tau), p2 = rng.uniform(0.0, tau);
      y.resize(n);
      for (std::size_t t = 0; t < n; ++t) {
        x[t] = s.amplitude * std::sin(tau * s.frequency_hz * time(t) + p1);
        y[t] = 0.5 * s.amplitude * std::sin(tau * 0.7 * s.frequency_hz * time(t) + p2);
      }
      break;
    }
    case InterferenceKind::expression_warp: {
      const double ph = rng.uniform(0.0, tau);
      for (std::size_t t = 0; t < n; ++t) {
        const double v = std::max(0.0, std::sin(tau * s.frequency_hz * time(t) + ph));
        x[t] = s.amplitude * v * v;
      }
      break;
    }
  }
  return {SignalTrace(std::move(x), fps, TraceKind::interference), std::move(y)};
}

inline double profile_weight(const InterferenceSpec& s, double x, std::size_t width) {
  if (s.profile == SpatialProfile::uniform) return 1.0;
  const double cx = 0.5 * static_cast<double>(width - 1);
  return 0.5 + s.slope * (x - cx) / (0.5 * static_cast<double>(width));
}

/// Smooth grey texture with a skin-toned fg patch.
inline std::vector<float> make_base(std::size_t H, std::size_t W, const Box& fg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xba5e}));
  std::vector<double> noise(H * W * 3);
  for (auto& v : noise) v = rng.uniform(-1.0, 1.0);
  std::vector<float> base(H * W * 3);
  const int r = 2;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        int cnt = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
            s += noise[(static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)) * 3 + c];
            ++cnt;
          }
        const bool skin = static_cast<int>(x) >= fg.x && static_cast<int>(x) < fg.right() &&
                          static_cast<int>(y) >= fg.y && static_cast<int>(y) < fg.bottom();
        const double mean = skin ? kSkinTone[c] : 0.45;
        base[(y * W + x) * 3 + c] = static_cast<float>(mean + (skin ? 0.08 : 0.15) * s / cnt);
      }
  return base;
}

/// Ground truth per frame: pulse r, realised fg / bg interference.
struct GroundTruth {
  std::vector<double> r, n_fg, n_bg;
  double hr_bpm = 0.0;
  double fps = 30.0;
};

struct RenderResult {
  Video video;
  GroundTruth truth;
  RegionLayout layout;
  double clip_fraction = 0.0;
  std::vector<std::string> warnings;
};

inline constexpr double kClipWarn = 0.01;
inline constexpr double kClipError = 0.10;

namespace synth_detail {

/// Bilinear sample of one channel with edge clamping.
inline double sample(const std::vector<double>& img, std::size_t H, std::size_t W, std::size_t c, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(H - 1));
  x = std::clamp(x, 0.0, static_cast<double>(W - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  auto at = [&](std::size_t yy, std::size_t xx) { return img[(yy * W + xx) * 3 + c]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

inline bool in_region(AppliesTo a, bool fg_pixel) {
  return a == AppliesTo::both || (a == AppliesTo::fg) == fg_pixel;
}

inline double region_mean(const std::vector<double>& diff, std::size_t W, const Box& b) {
  double s = 0.0;
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x)
      for (std::size_t c = 0; c < 3; ++c) s += diff[(static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) * 3 + c];
  return s / static_cast<double>(b.width * b.height * 3);
}

}  // namespace synth_detail

/// Renders base + pulse (fg), warps the frame for motion kinds, adds
/// illumination kinds through their spatial profile, requantises for
/// blockiness, then clips to [0, 1]. The truth is measured on the unclipped
/// render: n_fg and n_bg are region means of (frame - base) over pixels and
/// channels, with the fg pulse contribution removed.
inline RenderResult render_video(const SceneSpec& scene) {
  const std::size_t H = scene.height, W = scene.width, T = scene.frames();
  require(T >= 2, ErrorCode::invalid_argument, "scene needs at least 2 frames");
  require(scene.fg.width > 0 && scene.fg.height > 0 && scene.fg.x > 0 && scene.fg.y > 0 &&
              scene.fg.right() < static_cast<int>(W) && scene.fg.bottom() < static_cast<int>(H),
          ErrorCode::layout, "fg box must be nonempty and strictly inside the frame");
  RenderResult out;
  out.layout = layout_around(scene.fg, static_cast<int>(W), static_cast<int>(H));
  const std::vector<float> base = scene.base.empty() ? make_base(H, W, scene.fg, scene.seed) : scene.base;
  require(base.size() == H * W * 3, ErrorCode::shape_mismatch, "base image size mismatch");

  PulseSpec ps = scene.pulse;
  const SignalTrace pulse = make_pulse(ps, T, scene.fps);
  std::vector<InterferenceSignal> sig;
  for (std::size_t i = 0; i < scene.interference.size(); ++i)
    sig.push_back(make_interference(scene.interference[i], T, scene.fps, derive_seed(scene.seed, {0x1f, i})));

  auto is_fg = [&](std::size_t y, std::size_t x) {
    return static_cast<int>(x) >= scene.fg.x && static_cast<int>(x) < scene.fg.right() &&
           static_cast<int>(y) >= scene.fg.y && static_cast<int>(y) < scene.fg.bottom();
  };
  const double mix_mean = (kPulseMix[0] + kPulseMix[1] + kPulseMix[2]) / 3.0;
  out.video = Video(T, H, W, 3, scene.fps);
  out.truth.fps = scene.fps;
  out.truth.hr_bpm = ps.hr_bpm;
  std::size_t clipped = 0;
  require(scene.sensor_noise >= 0.0, ErrorCode::invalid_argument, "sensor noise must be nonnegative");
  Rng noise(derive_seed(scene.seed, {0x5e5}));
  std::vector<double> layer(H * W * 3), frame(H * W * 3), diff(H * W * 3);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t k = (y * W + x) * 3 + c;
          layer[k] = base[k] + (is_fg(y, x) ? kPulseMix[c] * pulse[t] : 0.0);
        }
    frame = layer;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      const auto& s = scene.interference[i];
      if (s.kind == InterferenceKind::translation_motion) {
        const double dx = sig[i].trace[t], dy = sig[i].secondary[t];
        const auto src = frame;
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x) {
            if (!synth_detail::in_region(s.applies_to, is_fg(y, x))) continue;
            for (std::size_t c = 0; c < 3; ++c)
              frame[(y * W + x) * 3 + c] =
                  synth_detail::sample(src, H, W, c, static_cast<double>(y) - dy, static_cast<double>(x) - dx);
          }
      } else if (s.kind == InterferenceKind::expression_warp) {
        const double stretch = sig[i].trace[t];
        const double mid = scene.fg.y + 0.5 * scene.fg.height;
        const auto src = frame;
        for (int y = static_cast<int>(std::ceil(mid)); y < scene.fg.bottom(); ++y)
          for (int x = scene.fg.x; x < scene.fg.right(); ++x)
            for (std::size_t c = 0; c < 3; ++c)
              frame[(static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) * 3 + c] = synth_detail::sample(
                  src, H, W, c, mid + (y - mid) / (1.0 + stretch), static_cast<double>(x));
      }
    }
    for (std::size_t i = 0; i < sig.size(); ++i) {
      const auto& s = scene.interference[i];
      if (s.kind != InterferenceKind::periodic_flicker && s.kind != InterferenceKind::illumination_drift) continue;
      const double n = sig[i].trace[t];
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          if (!synth_detail::in_region(s.applies_to, is_fg(y, x))) continue;
          const double w = profile_weight(s, static_cast<double>(x), W);
          for (std::size_t c = 0; c < 3; ++c) frame[(y * W + x) * 3 + c] += n * w * s.tint[c];
        }
    }
    for (std::size_t i = 0; i < sig.size(); ++i) {
      const auto& s = scene.interference[i];
      if (s.kind != InterferenceKind::blockiness || sig[i].trace[t] == 0.0) continue;
      const double q = s.amplitude;
      require(q > 0.0, ErrorCode::invalid_argument, "blockiness step must be positive");
      for (std::size_t ty = 0; ty < H; ty += 8)
        for (std::size_t tx = 0; tx < W; tx += 8) {
          const std::size_t ey = std::min(H, ty + 8), ex = std::min(W, tx + 8);
          for (std::size_t c = 0; c < 3; ++c) {
            double m = 0.0;
            for (std::size_t y = ty; y < ey; ++y)
              for (std::size_t x = tx; x < ex; ++x) m += frame[(y * W + x) * 3 + c];
            m /= static_cast<double>((ey - ty) * (ex - tx));
            const double qm = q * std::round(m / q);
            for (std::size_t y = ty; y < ey; ++y)
              for (std::size_t x = tx; x < ex; ++x) {
                if (!synth_detail::in_region(s.applies_to, is_fg(y, x))) continue;
                double& v = frame[(y * W + x) * 3 + c];
                v = qm + q * std::round((v - m) / q);
              }
          }
        }
    }
    for (std::size_t k = 0; k < frame.size(); ++k) {
      diff[k] = frame[k] - base[k];
      double v = frame[k];
      if (scene.sensor_noise > 0.0) v += scene.sensor_noise * noise.normal();
      if (v < 0.0 || v > 1.0) {
        ++clipped;
        v = std::clamp(v, 0.0, 1.0);
      }
      out.video.storage()[t * H * W * 3 + k] = static_cast<float>(v);
    }
    out.truth.r.push_back(pulse[t]);
    out.truth.n_fg.push_back(synth_detail::region_mean(diff, W, scene.fg) - mix_mean * pulse[t]);
    double nb = 0.0;
    for (const auto& b : out.layout.bg) nb += synth_detail::region_mean(diff, W, b);
    out.truth.n_bg.push_back(nb / static_cast<double>(out.layout.bg.size()));
  }
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(T * H * W * 3);
  require(out.clip_fraction <= kClipError, ErrorCode::invalid_argument,
          "rendering clips " + std::to_string(100.0 * out.clip_fraction) + "% of samples (limit 10%)");
  if (out.clip_fraction > kClipWarn)
    out.warnings.push_back("rendering clipped " + std::to_string(100.0 * out.clip_fraction) + "% of samples");
  return out;
}

enum class Protocol { P1, P2, P3, P4, P5 };

inline std::string to_string(Protocol p) { return "P" + std::to_string(static_cast<int>(p) + 1); }

inline Protocol parse_protocol(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (s == "P" + std::to_string(i + 1)) return static_cast<Protocol>(i);
  fail(ErrorCode::invalid_argument, "unknown protocol '" + s + "' (P1..P5)");
}

struct ProtocolOptions {
  std::size_t height = 20, width = 56;
  int fg_size = 12;
  double fps = 30.0;
  double duration_s = 30.0;
  double hr_lo = 66.0, hr_hi = 90.0;
  double pulse_amplitude = 0.01;
  /// P5 flicker: 0.9 Hz = 54 bpm.
  double flicker_hz = 0.9;
  double flicker_amplitude = 0.03;
  double sensor_noise = 0.0;
};

/// Interference recipe of each protocol.
///   P1 head-sway translation, P2 lower-face stretch bursts, P3 8x8
///   requantisation, P4 bluish gradient illumination (slow drift plus an
///   in-band lamp flicker), P5 grey flicker in fg and bg.
inline std::vector<InterferenceSpec> protocol_interference(Protocol p, const ProtocolOptions& o, Rng& rng) {
  std::vector<InterferenceSpec> v;
  switch (p) {
    case Protocol::P1:
      v.push_back({InterferenceKind::translation_motion, rng.uniform(0.2, 0.5), 1.5});
      break;
    case Protocol::P2:
      v.push_back({InterferenceKind::expression_warp, rng.uniform(0.2, 0.4), 0.3, SpatialProfile::uniform, 1.0,
                   AppliesTo::fg});
      break;
    case Protocol::P3:
      v.push_back({InterferenceKind::blockiness, 2.0, 0.02});
      break;
    case Protocol::P4: {
      const std::array<double, 3> cool{0.4, 0.7, 1.0};
      v.push_back({InterferenceKind::illumination_drift, 0.0, 0.06, SpatialProfile::gradient, 0.6, AppliesTo::both, cool});
      v.push_back({InterferenceKind::periodic_flicker, rng.uniform(0.75, 3.5), 0.03, SpatialProfile::gradient, 0.6,
                   AppliesTo::both, cool});
      break;
    }
    case Protocol::P5:
      v.push_back({InterferenceKind::periodic_flicker, o.flicker_hz, o.flicker_amplitude});
      break;
  }
  return v;
}

inline SceneSpec protocol_scene(Protocol p, std::size_t index, std::uint64_t dataset_seed, const ProtocolOptions& o) {
  SceneSpec s;
  s.seed = derive_seed(dataset_seed, {index});
  Rng rng(derive_seed(s.seed, {0x5ce}));
  s.height = o.height;
  s.width = o.width;
  s.fps = o.fps;
  s.duration_s = o.duration_s;
  s.fg = Box{static_cast<int>(o.width / 2) - o.fg_size / 2, static_cast<int>(o.height / 2) - o.fg_size / 2, o.fg_size,
             o.fg_size};
  s.pulse.hr_bpm = rng.uniform(o.hr_lo, o.hr_hi);
  s.pulse.amplitude = o.pulse_amplitude;
  s.pulse.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.interference = protocol_interference(p, o, rng);
  s.sensor_noise = o.sensor_noise;
  return s;
}

inline nlohmann::json to_json(const InterferenceSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"frequency_hz", s.frequency_hz},
          {"amplitude", s.amplitude},
          {"profile", s.profile == SpatialProfile::uniform ? "uniform" : "gradient"},
          {"slope", s.slope},
          {"applies_to", s.applies_to == AppliesTo::both ? "both" : s.applies_to == AppliesTo::fg ? "fg" : "bg"},
          {"tint", s.tint}};
}

inline nlohmann::json to_json(const SceneSpec& s) {
  nlohmann::json inter = nlohmann::json::array();
  for (const auto& i : s.interference) inter.push_back(to_json(i));
  return {{"height", s.height},
          {"width", s.width},
          {"fps", s.fps},
          {"duration_s", s.duration_s},
          {"fg", {s.fg.x, s.fg.y, s.fg.width, s.fg.height}},
          {"pulse",
           {{"hr_bpm", s.pulse.hr_bpm},
            {"amplitude", s.pulse.amplitude},
            {"harmonic_ratio", s.pulse.harmonic_ratio},
            {"phase", s.pulse.phase}}},
          {"interference", inter},
          {"sensor_noise", s.sensor_noise},
          {"seed", s.seed}};
}

inline void write_truth_csv(const std::filesystem::path& path, const GroundTruth& g) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::io, "cannot write " + path.string());
  os << "t,r,n_fg,n_bg,hr_bpm\n";
  for (std::size_t i = 0; i < g.r.size(); ++i)
    os << format_double(static_cast<double>(i) / g.fps) << ',' << format_double(g.r[i]) << ','
       << format_double(g.n_fg[i]) << ',' << format_double(g.n_bg[i]) << ',' << format_double(g.hr_bpm) << '\n';
  require(static_cast<bool>(os), ErrorCode::io, "failed writing " + path.string());
}

inline GroundTruth read_truth_csv(const std::filesystem::path& path, double fps) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::ingest, "cannot open " + path.string());
  GroundTruth g;
  g.fps = fps;
  std::string line;
  std::getline(is, line);
  require(line.rfind("t,r,n_fg,n_bg,hr_bpm", 0) == 0, ErrorCode::parse, path.string() + ": bad truth header");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 5> v{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      const std::size_t end = k < 4 ? line.find(',', start) : line.size();
      require(end != std::string::npos, ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": 5 fields expected");
      v[k] = parse_double(line.substr(start, end - start));
      start = end + 1;
    }
    g.r.push_back(v[1]);
    g.n_fg.push_back(v[2]);
    g.n_bg.push_back(v[3]);
    g.hr_bpm = v[4];
  }
  require(!g.r.empty(), ErrorCode::parse, path.string() + ": no rows");
  return g;
}

inline constexpr const char* kDatasetVersion = "ddrppg-synth-1";

struct DatasetEntry {
  std::string name;
  SceneSpec scene;
  double clip_fraction = 0.0;
};

/// Renders `n_videos` scenes of a protocol into `dir`:
/// videos/<name>.raw, boxes/<name>.boxes.csv, truth/<name>.csv, manifest.json.
/// Returns the manifest.
inline nlohmann::json make_protocol(Protocol p, std::size_t n_videos, std::uint64_t seed,
                                    const std::filesystem::path& dir, const ProtocolOptions& o = {},
                                    std::vector<std::string>* warnings = nullptr) {
  namespace fs = std::filesystem;
  require(n_videos >= 1, ErrorCode::invalid_argument, "need at least one video");
  for (const char* sub : {"videos", "boxes", "truth"}) fs::create_directories(dir / sub);
  nlohmann::json manifest{{"version", kDatasetVersion},
                          {"protocol", to_string(p)},
                          {"seed", seed},
                          {"fps", o.fps},
                          {"videos", nlohmann::json::array()}};
  for (std::size_t i = 0; i < n_videos; ++i) {
    const SceneSpec scene = protocol_scene(p, i, seed, o);
    const auto res = render_video(scene);
    char name[32];
    std::snprintf(name, sizeof name, "%s_%03zu", to_string(p).c_str(), i);
    write_raw_video(dir / "videos" / (std::string(name) + ".raw"), res.video);
    write_boxes_csv(sidecar_path_for(dir / "boxes", name), scene.fg);
    write_truth_csv(dir / "truth" / (std::string(name) + ".csv"), res.truth);
    if (warnings)
      for (const auto& w : res.warnings) warnings->push_back(std::string(name) + ": " + w);
    manifest["videos"].push_back({{"name", name},
                                  {"seed", scene.seed},
                                  {"hr_bpm", scene.pulse.hr_bpm},
                                  {"clip_fraction", res.clip_fraction},
                                  {"scene", to_json(scene)}});
  }
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::io, "cannot write manifest");
  os << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace ddrppg
