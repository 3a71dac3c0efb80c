#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"

namespace ddrppg {

/// Exactly invertible spatial transforms. Rotations are counter-clockwise.
enum class AugmentOp { rot90, rot180, rot270, hflip, vflip };

inline constexpr std::array<AugmentOp, 5> kAugmentOps = {AugmentOp::rot90, AugmentOp::rot180, AugmentOp::rot270,
                                                          AugmentOp::hflip, AugmentOp::vflip};

constexpr std::string_view to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::rot90: return "rot90";
    case AugmentOp::rot180: return "rot180";
    case AugmentOp::rot270: return "rot270";
    case AugmentOp::hflip: return "hflip";
    case AugmentOp::vflip: return "vflip";
  }
  return "rot90";
}

constexpr bool is_rotation(AugmentOp op) {
  return op == AugmentOp::rot90 || op == AugmentOp::rot270;
}

inline AugmentOp draw_augment(std::uint64_t seed) {
  Rng rng(seed);
  return kAugmentOps[rng.below(kAugmentOps.size())];
}

/// Source pixel (sy, sx) for output pixel (y, x).
inline void augment_source(AugmentOp op, std::size_t h, std::size_t w, std::size_t y, std::size_t x, std::size_t& sy,
                           std::size_t& sx) {
  switch (op) {
    case AugmentOp::rot90: sy = x; sx = w - 1 - y; break;
    case AugmentOp::rot180: sy = h - 1 - y; sx = w - 1 - x; break;
    case AugmentOp::rot270: sy = h - 1 - x; sx = y; break;
    case AugmentOp::hflip: sy = y; sx = w - 1 - x; break;
    case AugmentOp::vflip: sy = h - 1 - y; sx = x; break;
  }
}

/// Applies `op` to frame `t` of `in`, writing frame `t` of `out`.
inline void augment_frame(const Clip& in, Clip& out, std::size_t t, AugmentOp op) {
  const std::size_t h = in.height(), w = in.width(), c = in.channels();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t sy = 0, sx = 0;
      augment_source(op, h, w, y, x, sy, sx);
      for (std::size_t k = 0; k < c; ++k) out.at(t, y, x, k) = in.at(t, sy, sx, k);
    }
}

inline Clip apply_augment(const Clip& clip, AugmentOp op) {
  require(!is_rotation(op) || clip.height() == clip.width(), ErrorCode::invalid_argument,
          std::string("cannot apply ") + std::string(to_string(op)) + " to a non-square clip");
  Clip out(clip.frames(), clip.height(), clip.width(), clip.channels(), clip.fps());
  for (std::size_t t = 0; t < clip.frames(); ++t) augment_frame(clip, out, t, op);
  return out;
}

/// One uniformly drawn weak augmentation; temporal order untouched.
inline Clip augment_weak(const Clip& clip, std::uint64_t seed) {
  return apply_augment(clip, draw_augment(seed));
}

}  // namespace ddrppg
