#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddrppg/core/error.hpp"

namespace ddrppg {

/// Axis-aligned pixel box.
struct Box {
  int x = 0, y = 0, width = 0, height = 0;

  int right() const noexcept { return x + width; }
  int bottom() const noexcept { return y + height; }
  bool intersects(const Box& o) const noexcept {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }
  bool inside(int frame_w, int frame_h) const noexcept {
    return x >= 0 && y >= 0 && width > 0 && height > 0 && right() <= frame_w && bottom() <= frame_h;
  }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Video (or clip) frames laid out as (T, H, W, C), values nominally in [0, 1].
class Video {
 public:
  Video() = default;
  Video(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels, double fps, float fill = 0.f)
      : t_(frames), h_(height), w_(width), c_(channels), fps_(fps), data_(frames * height * width * channels, fill) {
    require(fps > 0.0, ErrorCode::invalid_argument, "fps must be positive");
  }

  std::size_t frames() const noexcept { return t_; }
  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t channels() const noexcept { return c_; }
  double fps() const noexcept { return fps_; }
  std::size_t frame_size() const noexcept { return h_ * w_ * c_; }

  float& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) noexcept {
    return data_[((t * h_ + y) * w_ + x) * c_ + c];
  }
  float at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const noexcept {
    return data_[((t * h_ + y) * w_ + x) * c_ + c];
  }

  std::vector<float>& storage() noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }

  /// Copy of frames [t0, t0 + dt) inside `box`.
  Video crop(std::size_t t0, std::size_t dt, const Box& box) const {
    require(t0 + dt <= t_, ErrorCode::invalid_argument, "temporal crop exceeds video length");
    require(box.inside(static_cast<int>(w_), static_cast<int>(h_)), ErrorCode::layout, "crop box outside frame");
    Video out(dt, static_cast<std::size_t>(box.height), static_cast<std::size_t>(box.width), c_, fps_);
    for (std::size_t t = 0; t < dt; ++t)
      for (int y = 0; y < box.height; ++y) {
        const float* src = &data_[(((t0 + t) * h_ + static_cast<std::size_t>(box.y + y)) * w_ +
                                   static_cast<std::size_t>(box.x)) * c_];
        std::copy(src, src + static_cast<std::size_t>(box.width) * c_, &out.at(t, static_cast<std::size_t>(y), 0, 0));
      }
    return out;
  }

  friend bool operator==(const Video& a, const Video& b) {
    return a.t_ == b.t_ && a.h_ == b.h_ && a.w_ == b.w_ && a.c_ == b.c_ && a.fps_ == b.fps_ && a.data_ == b.data_;
  }

 private:
  std::size_t t_ = 0, h_ = 0, w_ = 0, c_ = 0;
  double fps_ = 30.0;
  std::vector<float> data_;
};

/// A clip is a short video cut from one region.
using Clip = Video;

enum class RawDtype { f32, u8 };

namespace raw_detail {
inline constexpr char kMagic[8] = {'D', 'D', 'R', 'P', 'R', 'A', 'W', '1'};

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace raw_detail

/// Raw array container: 8-byte magic, u32 LE header length, JSON header
/// {"shape":[T,H,W,C],"dtype":"f32"|"u8","fps":..,"layout":"THWC"}, then
/// little-endian samples.
inline void write_raw_video(const std::filesystem::path& path, const Video& v, RawDtype dtype = RawDtype::f32) {
  nlohmann::json hdr = {{"shape", {v.frames(), v.height(), v.width(), v.channels()}},
                        {"dtype", dtype == RawDtype::f32 ? "f32" : "u8"},
                        {"fps", v.fps()},
                        {"layout", "THWC"}};
  const std::string text = hdr.dump();
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::io, "cannot write " + path.string());
  os.write(raw_detail::kMagic, 8);
  raw_detail::put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& d = v.storage();
  if (dtype == RawDtype::f32) {
    std::vector<std::uint32_t> bits(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) bits[i] = std::bit_cast<std::uint32_t>(d[i]);
    if constexpr (std::endian::native == std::endian::big)
      for (auto& b : bits) b = __builtin_bswap32(b);
    os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size() * 4));
  } else {
    std::vector<unsigned char> bytes(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(d[i], 0.f, 1.f) * 255.f));
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  require(static_cast<bool>(os), ErrorCode::io, "short write to " + path.string());
}

inline Video read_raw_video(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::ingest, "cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  require(is && std::memcmp(magic, raw_detail::kMagic, 8) == 0, ErrorCode::ingest,
          path.string() + " is not a raw video container");
  const std::uint32_t len = raw_detail::get_u32(is);
  require(len > 0 && len < (1u << 20), ErrorCode::ingest, "implausible header length in " + path.string());
  std::string text(len, '\0');
  is.read(text.data(), len);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ingest, "bad header in " + path.string() + ": " + e.what());
  }
  require(hdr.contains("shape") && hdr["shape"].is_array() && hdr["shape"].size() == 4, ErrorCode::ingest,
          "header shape must be [T,H,W,C]");
  const auto shape = hdr["shape"].get<std::vector<std::size_t>>();
  const std::string dtype = hdr.value("dtype", "f32");
  const std::string layout = hdr.value("layout", "THWC");
  require(layout == "THWC", ErrorCode::ingest, "unsupported layout " + layout);
  Video v(shape[0], shape[1], shape[2], shape[3], hdr.value("fps", 30.0));
  auto& d = v.storage();
  if (dtype == "f32") {
    std::vector<std::uint32_t> bits(d.size());
    is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size() * 4));
    require(static_cast<bool>(is), ErrorCode::ingest, "truncated data in " + path.string());
    if constexpr (std::endian::native == std::endian::big)
      for (auto& b : bits) b = __builtin_bswap32(b);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::bit_cast<float>(bits[i]);
  } else if (dtype == "u8") {
    std::vector<unsigned char> bytes(d.size());
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(is), ErrorCode::ingest, "truncated data in " + path.string());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(bytes[i]) / 255.f;
  } else {
    fail(ErrorCode::ingest, "unsupported dtype " + dtype);
  }
  return v;
}

}  // namespace ddrppg
