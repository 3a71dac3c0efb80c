#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"

namespace ddrppg {

/// Foreground box plus equally sized background boxes beside it.
struct RegionLayout {
  Box fg;
  std::vector<Box> bg;
};

inline constexpr int kBgGap = 4;

/// Reads `frame_index,x,y,w,h` lines. One line means a static box; several
/// lines must share a size and are averaged into one static position.
struct SidecarLocator {
  std::filesystem::path path;
};

/// Centered box; a zero size selects 0.3 x the shorter frame side.
struct FixedCenterLocator {
  int width = 0;
  int height = 0;
};

using Locator = std::variant<SidecarLocator, FixedCenterLocator>;

inline std::filesystem::path sidecar_path_for(const std::filesystem::path& dir, const std::string& stem) {
  return dir / (stem + ".boxes.csv");
}

inline std::vector<std::pair<int, Box>> read_boxes_csv(std::istream& is, const std::string& name = "boxes") {
  std::vector<std::pair<int, Box>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("frame_index", 0) == 0) continue;
    std::vector<long> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(cell, &used);
      } catch (const std::exception&) {
        used = std::string::npos;
      }
      require(used == cell.size(), ErrorCode::parse,
              name + ":" + std::to_string(lineno) + ": non-integer field '" + cell + "'");
      vals.push_back(v);
    }
    require(vals.size() == 5, ErrorCode::parse,
            name + ":" + std::to_string(lineno) + ": expected frame_index,x,y,w,h");
    rows.push_back({static_cast<int>(vals[0]), Box{static_cast<int>(vals[1]), static_cast<int>(vals[2]),
                                                   static_cast<int>(vals[3]), static_cast<int>(vals[4])}});
  }
  require(!rows.empty(), ErrorCode::parse, name + ": no boxes");
  return rows;
}

inline void write_boxes_csv(const std::filesystem::path& path, const Box& b) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot write " + path.string());
  os << "0," << b.x << ',' << b.y << ',' << b.width << ',' << b.height << '\n';
}

namespace region_detail {

/// Places one bg box on the given side. The preferred spot is level with the
/// fg box, kBgGap pixels away. When the frame is too narrow for that, the box
/// is pushed against the frame edge and moved below or above the fg box; its
/// center must still lie beyond the fg edge on that side.
inline bool place_side(const Box& fg, int frame_w, int frame_h, bool left_side, Box& out) {
  const int w = fg.width, h = fg.height;
  int x = left_side ? fg.x - kBgGap - w : fg.right() + kBgGap;
  x = std::clamp(x, 0, frame_w - w);
  const bool beyond = left_side ? 2 * x + w < 2 * fg.x : 2 * x + w > 2 * fg.right();
  if (!beyond || frame_w < w) return false;
  const Box keep_out{fg.x - kBgGap, fg.y - kBgGap, fg.width + 2 * kBgGap, fg.height + 2 * kBgGap};
  for (int y : {fg.y, fg.bottom() + kBgGap, fg.y - kBgGap - h}) {
    const Box cand{x, y, w, h};
    if (cand.inside(frame_w, frame_h) && !cand.intersects(keep_out)) {
      out = cand;
      return true;
    }
  }
  return false;
}

}  // namespace region_detail

/// Builds the layout around a given fg box: one bg box on its left and one on
/// its right, kBgGap pixels clear of it.
inline RegionLayout layout_around(const Box& fg, int frame_w, int frame_h) {
  require(fg.width > 0 && fg.height > 0, ErrorCode::layout, "fg box has no area");
  require(fg.inside(frame_w, frame_h), ErrorCode::layout, "fg box outside the frame");
  RegionLayout lay;
  lay.fg = fg;
  Box left, right;
  require(region_detail::place_side(fg, frame_w, frame_h, true, left), ErrorCode::layout,
          "no room for a left background box (fg x=" + std::to_string(fg.x) + ")");
  require(region_detail::place_side(fg, frame_w, frame_h, false, right), ErrorCode::layout,
          "no room for a right background box (fg right=" + std::to_string(fg.right()) + ")");
  lay.bg = {left, right};
  return lay;
}

inline RegionLayout locate_regions(std::size_t frame_w, std::size_t frame_h, const Locator& locator) {
  const int fw = static_cast<int>(frame_w), fh = static_cast<int>(frame_h);
  if (const auto* side = std::get_if<SidecarLocator>(&locator)) {
    std::ifstream is(side->path);
    require(static_cast<bool>(is), ErrorCode::parse, "cannot open sidecar " + side->path.string());
    const auto rows = read_boxes_csv(is, side->path.filename().string());
    const Box first = rows.front().second;
    double sx = 0.0, sy = 0.0;
    for (const auto& [idx, b] : rows) {
      require(b.width == first.width && b.height == first.height, ErrorCode::parse,
              "sidecar boxes must share one size");
      sx += b.x;
      sy += b.y;
    }
    const auto k = static_cast<double>(rows.size());
    const Box fg{static_cast<int>(std::lround(sx / k)), static_cast<int>(std::lround(sy / k)), first.width,
                 first.height};
    return layout_around(fg, fw, fh);
  }
  const auto& fc = std::get<FixedCenterLocator>(locator);
  const int side = static_cast<int>(std::lround(0.3 * std::min(fw, fh)));
  const int w = fc.width > 0 ? fc.width : side;
  const int h = fc.height > 0 ? fc.height : side;
  return layout_around(Box{(fw - w) / 2, (fh - h) / 2, w, h}, fw, fh);
}

inline RegionLayout locate_regions(const Video& video, const Locator& locator) {
  return locate_regions(video.width(), video.height(), locator);
}

}  // namespace ddrppg
