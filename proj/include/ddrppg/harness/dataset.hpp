#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddrppg/clip/regions.hpp"
#include "ddrppg/clip/video.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/synth/synth.hpp"

namespace ddrppg {

struct DatasetVideo {
  std::string name;
  Video video;
  RegionLayout layout;
  std::optional<GroundTruth> truth;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetVideo> videos;
};

namespace dataset_detail {

inline std::vector<std::string> video_names(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  const auto manifest = root / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream is(manifest);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const std::exception& e) {
      fail(ErrorCode::ingest, "bad manifest " + manifest.string() + ": " + e.what());
    }
    require(j.contains("videos") && j["videos"].is_array(), ErrorCode::ingest,
            manifest.string() + " has no videos array");
    for (const auto& v : j["videos"]) {
      require(v.contains("name") && v["name"].is_string(), ErrorCode::ingest, "manifest entry without a name");
      names.push_back(v["name"].get<std::string>());
    }
    return names;
  }
  const auto dir = root / "videos";
  require(fs::is_directory(dir), ErrorCode::ingest, root.string() + " has neither manifest.json nor videos/");
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".raw") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace dataset_detail

/// Loads videos/<name>.raw with boxes/<name>.boxes.csv (fixed-center box when
/// absent) and truth/<name>.csv when present. The video list comes from
/// manifest.json, or from the videos/ directory without one.
inline Dataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorCode::ingest, "dataset " + root.string() + " is not a directory");
  Dataset ds;
  ds.root = root;
  for (const auto& name : dataset_detail::video_names(root)) {
    DatasetVideo dv;
    dv.name = name;
    dv.video = read_raw_video(root / "videos" / (name + ".raw"));
    require(dv.video.channels() == 3, ErrorCode::ingest, name + ": expected 3 colour channels");
    const auto side = sidecar_path_for(root / "boxes", name);
    dv.layout = fs::exists(side) ? locate_regions(dv.video, SidecarLocator{side})
                                 : locate_regions(dv.video, FixedCenterLocator{});
    const auto truth = root / "truth" / (name + ".csv");
    if (fs::exists(truth)) {
      dv.truth = read_truth_csv(truth, dv.video.fps());
      require(dv.truth->r.size() == dv.video.frames(), ErrorCode::ingest,
              name + ": truth length differs from the video length");
    }
    ds.videos.push_back(std::move(dv));
  }
  require(!ds.videos.empty(), ErrorCode::ingest, "dataset " + root.string() + " holds no videos");
  return ds;
}

}  // namespace ddrppg
