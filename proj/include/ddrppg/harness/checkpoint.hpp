#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddrppg/core/error.hpp"
#include "ddrppg/harness/config.hpp"
#include "ddrppg/harness/metrics.hpp"
#include "ddrppg/harness/optim.hpp"
#include "ddrppg/net/network.hpp"

namespace ddrppg {

inline constexpr char kCheckpointMagic[8] = {'D', 'D', 'R', 'P', 'C', 'K', 'P', '1'};

/// Everything needed to resume training or to run evaluation.
struct Checkpoint {
  TrainConfig config;
  DdNetwork<float> net;
  AdamW<float> optim;
  /// Completed epochs and optimizer steps.
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::vector<MetricsRow> metrics;
};

namespace checkpoint_detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_floats(std::string& out, const std::vector<float>& x) {
  for (float f : x) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
  }
}

inline std::vector<float> get_floats(const std::string& blob, std::size_t offset, std::size_t count) {
  require(offset + 4 * count <= blob.size(), ErrorCode::ingest, "checkpoint array runs past the data");
  std::vector<float> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + 4 * k + i])) << (8 * i);
    out[k] = std::bit_cast<float>(u);
  }
  return out;
}

inline nlohmann::json row_json(const MetricsRow& r) {
  return {r.epoch, r.step, r.stage, r.l_nc, r.l_kcn, r.l_cr_hat, r.l_dcr, r.total};
}

inline MetricsRow row_from(const nlohmann::json& j) {
  MetricsRow r;
  r.epoch = j.at(0).get<std::size_t>();
  r.step = j.at(1).get<std::size_t>();
  r.stage = j.at(2).get<int>();
  r.l_nc = j.at(3).get<double>();
  r.l_kcn = j.at(4).get<double>();
  r.l_cr_hat = j.at(5).get<double>();
  r.l_dcr = j.at(6).get<double>();
  r.total = j.at(7).get<double>();
  return r;
}

}  // namespace checkpoint_detail

/// Layout: 8-byte magic, u64 LE header length, JSON header, then the arrays
/// listed in the header as little-endian IEEE-754 binary32. Arrays are the
/// network parameters followed by the "adam.m." and "adam.v." moments.
inline void save_checkpoint(const std::filesystem::path& path, Checkpoint ck) {
  using namespace checkpoint_detail;
  if (ck.optim.m.empty()) ck.optim.init(ck.net);
  nlohmann::json arrays = nlohmann::json::array();
  std::string blob;
  auto add = [&](const std::string& name, const std::vector<float>& data, const std::vector<std::size_t>& shape) {
    arrays.push_back({{"name", name}, {"shape", shape}, {"offset", blob.size()}, {"count", data.size()}});
    put_floats(blob, data);
  };
  std::vector<std::pair<std::string, std::vector<std::size_t>>> names;
  ck.net.visit([&](const std::string& name, std::vector<float>& p, const std::vector<std::size_t>& shape) {
    add(name, p, shape);
    names.emplace_back(name, shape);
  });
  for (std::size_t k = 0; k < names.size(); ++k) add("adam.m." + names[k].first, ck.optim.m[k], names[k].second);
  for (std::size_t k = 0; k < names.size(); ++k) add("adam.v." + names[k].first, ck.optim.v[k], names[k].second);

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : ck.metrics) rows.push_back(row_json(r));
  const nlohmann::json hdr{{"format", "ddrppg-checkpoint-1"},
                           {"dtype", "f32le"},
                           {"architecture", ck.net.config.to_json()},
                           {"config", config_to_json(ck.config)},
                           {"epoch", ck.epoch},
                           {"step", ck.step},
                           {"adam", {{"t", ck.optim.t}, {"beta1", ck.optim.beta1}, {"beta2", ck.optim.beta2},
                                     {"eps", ck.optim.eps}, {"weight_decay", ck.optim.weight_decay}}},
                           {"metrics", rows},
                           {"arrays", arrays}};
  const std::string text = hdr.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::io, "cannot write " + tmp.string());
    os.write(kCheckpointMagic, 8);
    put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    require(static_cast<bool>(os), ErrorCode::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  using namespace checkpoint_detail;
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::ingest, "cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, 8);
  require(is && std::memcmp(magic, kCheckpointMagic, 8) == 0, ErrorCode::ingest, path.string() + " is not a checkpoint");
  const std::uint64_t len = get_u64(is);
  require(len > 0 && len < (1ull << 30), ErrorCode::ingest, "implausible checkpoint header length");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  require(static_cast<bool>(is), ErrorCode::ingest, "truncated checkpoint header");
  const std::string blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  Checkpoint ck;
  try {
    const auto hdr = nlohmann::json::parse(text);
    require(hdr.at("dtype") == "f32le", ErrorCode::unsupported_format, "checkpoint dtype must be f32le");
    ck.config = config_from_json(hdr.at("config"));
    ck.net = make_network<float>(BranchConfig::from_json(hdr.at("architecture")), 0);
    ck.epoch = hdr.at("epoch").get<std::size_t>();
    ck.step = hdr.at("step").get<std::size_t>();
    const auto& a = hdr.at("adam");
    ck.optim.t = a.at("t").get<std::size_t>();
    ck.optim.beta1 = a.at("beta1").get<double>();
    ck.optim.beta2 = a.at("beta2").get<double>();
    ck.optim.eps = a.at("eps").get<double>();
    ck.optim.weight_decay = a.at("weight_decay").get<double>();
    for (const auto& r : hdr.at("metrics")) ck.metrics.push_back(row_from(r));

    std::map<std::string, nlohmann::json> index;
    for (const auto& e : hdr.at("arrays")) index[e.at("name").get<std::string>()] = e;
    auto fetch = [&](const std::string& name, const std::vector<std::size_t>& shape, std::vector<float>& dst) {
      const auto it = index.find(name);
      require(it != index.end(), ErrorCode::ingest, "checkpoint lacks array " + name);
      require(it->second.at("shape").get<std::vector<std::size_t>>() == shape, ErrorCode::shape_mismatch,
              "checkpoint array " + name + " has the wrong shape");
      const auto count = it->second.at("count").get<std::size_t>();
      require(count == dst.size(), ErrorCode::shape_mismatch, "checkpoint array " + name + " has the wrong size");
      dst = get_floats(blob, it->second.at("offset").get<std::size_t>(), count);
    };
    const std::size_t t = ck.optim.t;
    ck.optim.init(ck.net);
    std::size_t k = 0;
    ck.net.visit([&](const std::string& name, std::vector<float>& p, const std::vector<std::size_t>& shape) {
      fetch(name, shape, p);
      fetch("adam.m." + name, shape, ck.optim.m[k]);
      fetch("adam.v." + name, shape, ck.optim.v[k]);
      ++k;
    });
    ck.optim.t = t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ingest, "bad checkpoint header in " + path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace ddrppg
