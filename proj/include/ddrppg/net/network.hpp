#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddrppg/clip/sampling.hpp"
#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/array.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"
#include "ddrppg/net/layers.hpp"
#include "ddrppg/signal/trace.hpp"

namespace ddrppg {

struct BranchConfig {
  /// ConvBlock1, ConvBlock2 pair 1, ConvBlock2 pair 2, ConvBlock3 pair 1,
  /// ConvBlock3 pair 2 (the estimator also runs at the last width).
  std::array<std::size_t, 5> widths{16, 24, 32, 40, 48};
  double epsilon = 0.7;
  /// ConvBlock3 and ConvBlock4 use 3DLDC; false makes them vanilla.
  bool descriptive = true;
  bool per_filter_descriptor = true;

  nlohmann::json to_json() const {
    return {{"widths", widths},
            {"epsilon", epsilon},
            {"descriptive", descriptive},
            {"per_filter_descriptor", per_filter_descriptor},
            {"extractor", "1 vanilla + 4 vanilla + 4 descriptive, 2x2 avg pool after blocks 1 and 3"},
            {"estimator", "descriptive block + descriptive head, spatial mean"}};
  }
  static BranchConfig from_json(const nlohmann::json& j) {
    BranchConfig c;
    c.widths = j.at("widths").get<std::array<std::size_t, 5>>();
    c.epsilon = j.at("epsilon").get<double>();
    c.descriptive = j.at("descriptive").get<bool>();
    c.per_filter_descriptor = j.at("per_filter_descriptor").get<bool>();
    return c;
  }
  friend bool operator==(const BranchConfig&, const BranchConfig&) = default;
};

enum class Branch { interference, rppg };

/// Extractor pooling happens after these block indices.
inline constexpr std::array<std::size_t, 2> kPoolAfter = {0, 2};

template <class T>
struct Extractor {
  std::vector<ConvBlock<T>> blocks;
};

template <class T>
struct Estimator {
  std::vector<ConvBlock<T>> blocks;
};

template <class T>
struct ExtractorTape {
  std::vector<BlockTape<T>> blocks;
  std::vector<std::array<std::size_t, 2>> pool_in;
};

template <class T>
struct EstimatorTape {
  std::vector<BlockTape<T>> blocks;
  std::size_t height = 0, width = 0;
};

template <class T>
Extractor<T> make_extractor(const BranchConfig& cfg, Rng& rng) {
  const auto& w = cfg.widths;
  const T eps = static_cast<T>(cfg.epsilon);
  const BlockKind d = cfg.descriptive ? BlockKind::ldc3d : BlockKind::vanilla;
  Extractor<T> e;
  const std::array<std::pair<std::size_t, std::size_t>, 9> io = {
      {{3, w[0]}, {w[0], w[1]}, {w[1], w[1]}, {w[1], w[2]}, {w[2], w[2]}, {w[2], w[3]}, {w[3], w[3]}, {w[3], w[4]},
       {w[4], w[4]}}};
  for (std::size_t i = 0; i < io.size(); ++i)
    e.blocks.push_back(make_block<T>(i < 5 ? BlockKind::vanilla : d, io[i].first, io[i].second, true, eps,
                                     cfg.per_filter_descriptor, rng));
  return e;
}

template <class T>
Estimator<T> make_estimator(const BranchConfig& cfg, Rng& rng) {
  const T eps = static_cast<T>(cfg.epsilon);
  const BlockKind d = cfg.descriptive ? BlockKind::ldc3d : BlockKind::vanilla;
  Estimator<T> e;
  e.blocks.push_back(make_block<T>(d, cfg.widths[4], cfg.widths[4], true, eps, cfg.per_filter_descriptor, rng));
  e.blocks.push_back(make_block<T>(d, cfg.widths[4], 1, false, eps, cfg.per_filter_descriptor, rng));
  return e;
}

/// (T, H, W, 3) clip -> (3, T, H, W) volume with each pixel's temporal mean
/// removed, so only temporal variation reaches the network.
template <class T>
Volume<T> prepare_input(const Clip& clip) {
  require(clip.channels() == 3, ErrorCode::shape_mismatch, "network input needs 3 channels");
  require(clip.frames() >= 1 && clip.height() >= 4 && clip.width() >= 4, ErrorCode::shape_mismatch,
          "network input needs at least 4x4 pixels");
  const std::size_t TT = clip.frames(), H = clip.height(), W = clip.width();
  Volume<T> v(3, TT, H, W);
  std::vector<double> mean(H * W * 3, 0.0);
  for (std::size_t t = 0; t < TT; ++t)
    for (std::size_t i = 0; i < H * W * 3; ++i) mean[i] += clip.storage()[t * H * W * 3 + i];
  for (auto& m : mean) m /= static_cast<double>(TT);
  for (std::size_t t = 0; t < TT; ++t)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t k = (y * W + x) * 3 + c;
          v(c, t, y, x) = static_cast<T>(clip.storage()[t * H * W * 3 + k] - mean[k]);
        }
  return v;
}

template <class T>
Volume<T> extractor_forward(const Extractor<T>& e, Volume<T> x, ExtractorTape<T>* tape = nullptr) {
  if (tape) {
    tape->blocks.assign(e.blocks.size(), {});
    tape->pool_in.clear();
  }
  for (std::size_t i = 0; i < e.blocks.size(); ++i) {
    x = block_forward(e.blocks[i], x, tape ? &tape->blocks[i] : nullptr);
    if (i == kPoolAfter[0] || i == kPoolAfter[1]) {
      if (tape) tape->pool_in.push_back({x.height(), x.width()});
      x = avg_pool2(x);
    }
  }
  return x;
}

/// Backpropagates dL/dfeatures into `grads`. The input gradient (w.r.t. the
/// prepared clip) is returned only when asked for.
template <class T>
Volume<T> extractor_backward(const Extractor<T>& e, const ExtractorTape<T>& tape, Volume<T> g, Extractor<T>& grads,
                             bool need_input = false) {
  std::size_t pool = tape.pool_in.size();
  for (std::size_t i = e.blocks.size(); i-- > 0;) {
    if (i == kPoolAfter[0] || i == kPoolAfter[1]) {
      --pool;
      g = avg_pool2_backward(g, tape.pool_in[pool][0], tape.pool_in[pool][1]);
    }
    g = block_backward(e.blocks[i], tape.blocks[i], g, grads.blocks[i], i > 0 || need_input);
  }
  return g;
}

template <class T>
std::vector<T> estimator_forward(const Estimator<T>& e, const Volume<T>& f, EstimatorTape<T>* tape = nullptr) {
  require(f.height() >= 1 && f.width() >= 1, ErrorCode::shape_mismatch, "degenerate feature map");
  if (tape) {
    tape->blocks.assign(e.blocks.size(), {});
    tape->height = f.height();
    tape->width = f.width();
  }
  Volume<T> x = f;
  for (std::size_t i = 0; i < e.blocks.size(); ++i) x = block_forward(e.blocks[i], x, tape ? &tape->blocks[i] : nullptr);
  return spatial_mean(x);
}

template <class T>
Volume<T> estimator_backward(const Estimator<T>& e, const EstimatorTape<T>& tape, const std::vector<T>& g_trace,
                             Estimator<T>& grads) {
  Volume<T> g = spatial_mean_backward(g_trace, tape.height, tape.width);
  for (std::size_t i = e.blocks.size(); i-- > 0;) g = block_backward(e.blocks[i], tape.blocks[i], g, grads.blocks[i]);
  return g;
}

/// f_r = f_hat_r - f_n_fg
template <class T>
Volume<T> deinterfere(const Volume<T>& f_hat_r, const Volume<T>& f_n_fg) {
  require(f_hat_r.same_shape(f_n_fg), ErrorCode::shape_mismatch,
          "deinterfere shapes differ: " + f_hat_r.shape_string() + " vs " + f_n_fg.shape_string());
  return Volume<T>(f_hat_r - f_n_fg);
}

template <class T>
struct ForwardBundle {
  std::vector<SignalTrace> n_fg, n_bg, r_hat, r;
  /// One entry per fg clip followed by one per augmented clip.
  std::vector<Volume<T>> f_n_fg, f_hat_r, f_r;
};

/// Traces of one fg or augmented clip and, when taped, what backward needs.
template <class T>
struct FgUnit {
  std::vector<T> n, r_hat, r;
  Volume<T> f_n, f_hat_r, f_r;
  ExtractorTape<T> tape_fn, tape_fr;
  EstimatorTape<T> tape_en, tape_er_hat, tape_er;
};

template <class T>
struct DdNetwork {
  BranchConfig config;
  Extractor<T> f_n, f_r;
  Estimator<T> e_n, e_r;

  const Extractor<T>& extractor(Branch b) const { return b == Branch::interference ? f_n : f_r; }
  const Estimator<T>& estimator(Branch b) const { return b == Branch::interference ? e_n : e_r; }

  Volume<T> extract_features(const Clip& clip, Branch b) const {
    return extractor_forward(extractor(b), prepare_input<T>(clip));
  }
  std::vector<T> estimate(const Volume<T>& features, Branch b) const {
    return estimator_forward(estimator(b), features);
  }

  DdNetwork zeros_like() const {
    DdNetwork z = *this;
    for (auto* ex : {&z.f_n, &z.f_r})
      for (auto& b : ex->blocks) b = b.zeros_like();
    for (auto* es : {&z.e_n, &z.e_r})
      for (auto& b : es->blocks) b = b.zeros_like();
    return z;
  }

  /// f(name, storage, shape) over every trainable array in a fixed order.
  template <class F>
  void visit(F&& f) {
    auto ex = [&](const char* name, Extractor<T>& e) {
      for (std::size_t i = 0; i < e.blocks.size(); ++i) e.blocks[i].visit(std::string(name) + "." + std::to_string(i), f);
    };
    auto es = [&](const char* name, Estimator<T>& e) {
      for (std::size_t i = 0; i < e.blocks.size(); ++i) e.blocks[i].visit(std::string(name) + "." + std::to_string(i), f);
    };
    ex("F_n", f_n);
    es("E_n", e_n);
    ex("F_r", f_r);
    es("E_r", e_r);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, std::vector<T>& v, const std::vector<std::size_t>&) { n += v.size(); });
    return n;
  }

  /// Forward pass of a fg (or augmented) clip through both branches.
  FgUnit<T> fg_unit(const Clip& clip, bool keep_tape, bool want_n = true) const {
    FgUnit<T> u;
    const Volume<T> x = prepare_input<T>(clip);
    u.f_n = extractor_forward(f_n, x, keep_tape ? &u.tape_fn : nullptr);
    if (want_n) u.n = estimator_forward(e_n, u.f_n, keep_tape ? &u.tape_en : nullptr);
    u.f_hat_r = extractor_forward(f_r, x, keep_tape ? &u.tape_fr : nullptr);
    u.r_hat = estimator_forward(e_r, u.f_hat_r, keep_tape ? &u.tape_er_hat : nullptr);
    u.f_r = deinterfere(u.f_hat_r, u.f_n);
    u.r = estimator_forward(e_r, u.f_r, keep_tape ? &u.tape_er : nullptr);
    return u;
  }

  /// Gradients of a taped fg unit. Empty g vectors mean "no gradient".
  void fg_unit_backward(const FgUnit<T>& u, const std::vector<T>& g_n, const std::vector<T>& g_r_hat,
                        const std::vector<T>& g_r, DdNetwork& grads) const {
    const std::size_t C = u.f_n.channels();
    Volume<T> g_fhat(C, u.f_n.frames(), u.f_n.height(), u.f_n.width());
    Volume<T> g_fn(C, u.f_n.frames(), u.f_n.height(), u.f_n.width());
    if (!g_r_hat.empty()) g_fhat += estimator_backward(e_r, u.tape_er_hat, g_r_hat, grads.e_r);
    if (!g_r.empty()) {
      const Volume<T> g_fr = estimator_backward(e_r, u.tape_er, g_r, grads.e_r);
      g_fhat += g_fr;
      g_fn -= g_fr;
    }
    if (!g_n.empty()) g_fn += estimator_backward(e_n, u.tape_en, g_n, grads.e_n);
    extractor_backward(f_r, u.tape_fr, g_fhat, grads.f_r);
    extractor_backward(f_n, u.tape_fn, g_fn, grads.f_n);
  }

  std::vector<T> bg_unit(const Clip& clip, ExtractorTape<T>* tf = nullptr, EstimatorTape<T>* te = nullptr) const {
    return estimator_forward(e_n, extractor_forward(f_n, prepare_input<T>(clip), tf), te);
  }

  void bg_unit_backward(const ExtractorTape<T>& tf, const EstimatorTape<T>& te, const std::vector<T>& g_n,
                        DdNetwork& grads) const {
    extractor_backward(f_n, tf, estimator_backward(e_n, te, g_n, grads.e_n), grads.f_n);
  }

  ForwardBundle<T> forward_all(const ClipSet& set) const {
    ForwardBundle<T> b;
    auto trace = [](const std::vector<T>& v, double fs, TraceKind k) {
      for (T x : v) require(std::isfinite(static_cast<double>(x)), ErrorCode::divergence, "non-finite network output");
      return SignalTrace(std::vector<double>(v.begin(), v.end()), fs, k);
    };
    for (const auto* group : {&set.fg_clips, &set.aug_fg_clips}) {
      const bool is_fg = group == &set.fg_clips;
      for (const auto& clip : *group) {
        auto u = fg_unit(clip, false, is_fg);
        if (is_fg) b.n_fg.push_back(trace(u.n, clip.fps(), TraceKind::interference));
        b.r_hat.push_back(trace(u.r_hat, clip.fps(), TraceKind::rppg));
        b.r.push_back(trace(u.r, clip.fps(), TraceKind::rppg));
        b.f_n_fg.push_back(std::move(u.f_n));
        b.f_hat_r.push_back(std::move(u.f_hat_r));
        b.f_r.push_back(std::move(u.f_r));
      }
    }
    for (const auto& clip : set.bg_clips) b.n_bg.push_back(trace(bg_unit(clip), clip.fps(), TraceKind::interference));
    return b;
  }
};

template <class T>
DdNetwork<T> make_network(const BranchConfig& cfg, std::uint64_t seed) {
  for (auto w : cfg.widths) require(w >= 1, ErrorCode::config, "block widths must be positive");
  require(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0, ErrorCode::config, "epsilon must lie in [0, 1]");
  DdNetwork<T> net;
  net.config = cfg;
  Rng rng(derive_seed(seed, {0x4e7}));
  net.f_n = make_extractor<T>(cfg, rng);
  net.e_n = make_estimator<T>(cfg, rng);
  net.f_r = make_extractor<T>(cfg, rng);
  net.e_r = make_estimator<T>(cfg, rng);
  return net;
}

/// Same parameters in another scalar type.
template <class U, class T>
DdNetwork<U> cast_network(const DdNetwork<T>& src) {
  DdNetwork<U> out = make_network<U>(src.config, 0);
  auto s = src;
  std::vector<std::vector<T>*> from;
  s.visit([&](const std::string&, std::vector<T>& v, const std::vector<std::size_t>&) { from.push_back(&v); });
  std::size_t k = 0;
  out.visit([&](const std::string&, std::vector<U>& v, const std::vector<std::size_t>&) {
    const auto& f = *from[k++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(f[i]);
  });
  return out;
}

}  // namespace ddrppg
