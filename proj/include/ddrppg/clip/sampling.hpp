#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddrppg/clip/augment.hpp"
#include "ddrppg/clip/regions.hpp"
#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"

namespace ddrppg {

struct ClipGeometry {
  std::size_t count = 4;    // L
  std::size_t frames = 150; // dt
  std::size_t height = 64;
  std::size_t width = 64;
};

/// Where each clip of a ClipSet was cut from.
struct ClipOrigin {
  std::size_t t0 = 0;
  Box fg;
  Box bg;
  std::size_t bg_index = 0;
  AugmentOp aug = AugmentOp::rot90;
};

struct ClipSet {
  std::vector<Clip> fg_clips;
  std::vector<Clip> bg_clips;
  std::vector<Clip> aug_fg_clips;
  std::vector<ClipOrigin> origins;
  std::string source_id;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return fg_clips.size(); }
};

/// Samples L fg clips at random positions inside the fg box and L bg clips
/// from a uniformly chosen bg box. The l-th fg and bg clips share their time
/// window, so interference common to both regions lines up sample by sample.
inline ClipSet sample_clips(const Video& video, const RegionLayout& layout, const ClipGeometry& g, std::uint64_t seed,
                            const std::string& source_id = {}) {
  require(g.count >= 1, ErrorCode::invalid_argument, "need at least one clip");
  require(g.frames >= 2, ErrorCode::invalid_argument, "clips need at least 2 frames");
  require(g.frames <= video.frames(), ErrorCode::invalid_argument,
          "clip length " + std::to_string(g.frames) + " exceeds video length " + std::to_string(video.frames()));
  require(g.height >= 1 && g.width >= 1, ErrorCode::invalid_argument, "clip size must be positive");
  require(!layout.bg.empty(), ErrorCode::layout, "layout has no background boxes");
  auto fits = [&](const Box& b) {
    return g.height <= static_cast<std::size_t>(b.height) && g.width <= static_cast<std::size_t>(b.width);
  };
  require(fits(layout.fg), ErrorCode::invalid_argument,
          "clip " + std::to_string(g.height) + "x" + std::to_string(g.width) + " exceeds the fg box");
  for (const auto& b : layout.bg) require(fits(b), ErrorCode::invalid_argument, "clip exceeds a bg box");

  Rng rng(derive_seed(seed, {0x5a3}));
  auto sub_box = [&](const Box& b) {
    const auto ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(b.width) - g.width + 1));
    const auto oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(b.height) - g.height + 1));
    return Box{b.x + ox, b.y + oy, static_cast<int>(g.width), static_cast<int>(g.height)};
  };

  ClipSet set;
  set.source_id = source_id;
  set.seed = seed;
  for (std::size_t l = 0; l < g.count; ++l) {
    ClipOrigin o;
    o.t0 = static_cast<std::size_t>(rng.below(video.frames() - g.frames + 1));
    o.fg = sub_box(layout.fg);
    o.bg_index = static_cast<std::size_t>(rng.below(layout.bg.size()));
    o.bg = sub_box(layout.bg[o.bg_index]);
    const std::uint64_t aug_seed = derive_seed(seed, {0xa06, l});
    o.aug = draw_augment(aug_seed);
    set.fg_clips.push_back(video.crop(o.t0, g.frames, o.fg));
    set.bg_clips.push_back(video.crop(o.t0, g.frames, o.bg));
    set.aug_fg_clips.push_back(augment_weak(set.fg_clips.back(), aug_seed));
    set.origins.push_back(o);
  }
  return set;
}

}  // namespace ddrppg
