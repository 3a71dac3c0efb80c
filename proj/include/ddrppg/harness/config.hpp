#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddrppg/core/error.hpp"
#include "ddrppg/loss/losses.hpp"
#include "ddrppg/net/network.hpp"
#include "ddrppg/signal/trace_csv.hpp"

namespace ddrppg {

struct TrainConfig {
  double lr = 1e-5;
  std::string optimizer = "adamw";
  double weight_decay = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 2;
  /// 0 means ceil(videos / batch_size).
  std::size_t steps_per_epoch = 0;
  double stage1_fraction = 0.2;
  double w_nc = 1.0, w_kcn = 1.0, w_cr_hat = 1.0, w_dcr = 1.0;
  std::size_t clusters = 4;
  std::size_t clips = 4;
  std::size_t clip_frames = 150;
  std::size_t clip_height = 64, clip_width = 64;
  double epsilon = 0.7;
  std::string widths = "16,24,32,40,48";
  bool descriptive = true;
  bool per_filter_descriptor = true;
  std::size_t psd_pad = 1;
  /// Recorded only; their meaning is not pinned down.
  std::size_t p_n = 4, p_r = 2, d = 4;
  std::uint64_t seed = 0;
  std::string dataset;
  std::string checkpoint_dir = "checkpoints";
  std::string resume;
  double eval_window_s = 30.0;

  BranchConfig branch() const;
  LossWeights weights() const { return {w_nc, w_kcn, w_cr_hat, w_dcr}; }
  void validate() const;
};

namespace config_detail {

struct Field {
  const char* key;
  const char* type;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v, key);
  } catch (const Error&) {
    fail(ErrorCode::config, key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  require(r.ec == std::errc() && r.ptr == v.data() + v.size(), ErrorCode::config,
          key + ": expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::config, key + ": expected true/false, got '" + v + "'");
}

inline std::string show_bool(bool b) { return b ? "true" : "false"; }

#define DDRPPG_REAL(name) \
  Field{#name, "real", [](TrainConfig& c, const std::string& v) { c.name = to_real(#name, v); }, \
        [](const TrainConfig& c) { return format_double(c.name); }}
#define DDRPPG_UINT(name) \
  Field{#name, "uint", [](TrainConfig& c, const std::string& v) { c.name = static_cast<decltype(c.name)>(to_uint(#name, v)); }, \
        [](const TrainConfig& c) { return std::to_string(c.name); }}
#define DDRPPG_BOOL(name) \
  Field{#name, "bool", [](TrainConfig& c, const std::string& v) { c.name = to_bool(#name, v); }, \
        [](const TrainConfig& c) { return show_bool(c.name); }}
#define DDRPPG_TEXT(name) \
  Field{#name, "string", [](TrainConfig& c, const std::string& v) { c.name = v; }, \
        [](const TrainConfig& c) { return c.name; }}

inline const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      DDRPPG_REAL(lr),          DDRPPG_TEXT(optimizer),     DDRPPG_REAL(weight_decay),
      DDRPPG_UINT(epochs),      DDRPPG_UINT(batch_size),    DDRPPG_UINT(steps_per_epoch),
      DDRPPG_REAL(stage1_fraction),
      DDRPPG_REAL(w_nc),        DDRPPG_REAL(w_kcn),         DDRPPG_REAL(w_cr_hat),
      DDRPPG_REAL(w_dcr),       DDRPPG_UINT(clusters),      DDRPPG_UINT(clips),
      DDRPPG_UINT(clip_frames), DDRPPG_UINT(clip_height),   DDRPPG_UINT(clip_width),
      DDRPPG_REAL(epsilon),     DDRPPG_TEXT(widths),        DDRPPG_BOOL(descriptive),
      DDRPPG_BOOL(per_filter_descriptor),                   DDRPPG_UINT(psd_pad),
      DDRPPG_UINT(p_n),         DDRPPG_UINT(p_r),           DDRPPG_UINT(d),
      DDRPPG_UINT(seed),        DDRPPG_TEXT(dataset),       DDRPPG_TEXT(checkpoint_dir),
      DDRPPG_TEXT(resume),      DDRPPG_REAL(eval_window_s),
  };
  return fields;
}

#undef DDRPPG_REAL
#undef DDRPPG_UINT
#undef DDRPPG_BOOL
#undef DDRPPG_TEXT

inline const Field& field(const std::string& key) {
  for (const auto& f : schema())
    if (key == f.key) return f;
  fail(ErrorCode::config, "unknown config key '" + key + "'");
}

inline std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(static_cast<std::size_t>(to_uint("widths", trim(cell))));
  require(out.size() == 5, ErrorCode::config, "widths: expected 5 comma-separated channel counts, got '" + s + "'");
  for (auto w : out) require(w >= 1, ErrorCode::config, "widths: channel counts must be positive");
  return out;
}

}  // namespace config_detail

inline BranchConfig TrainConfig::branch() const {
  BranchConfig b;
  const auto w = config_detail::parse_widths(widths);
  for (std::size_t i = 0; i < 5; ++i) b.widths[i] = w[i];
  b.epsilon = epsilon;
  b.descriptive = descriptive;
  b.per_filter_descriptor = per_filter_descriptor;
  return b;
}

inline void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) { require(ok, ErrorCode::config, msg); };
  need(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  need(optimizer == "adamw", "optimizer must be adamw");
  need(weight_decay >= 0.0, "weight_decay must be nonnegative");
  need(epochs >= 1, "epochs must be at least 1");
  need(batch_size >= 2, "batch_size must be at least 2: contrastive negatives come from other videos");
  need(stage1_fraction >= 0.0 && stage1_fraction <= 1.0, "stage1_fraction must lie in [0, 1]");
  for (double w : {w_nc, w_kcn, w_cr_hat, w_dcr}) need(w >= 0.0 && std::isfinite(w), "loss weights must be nonnegative");
  need(clusters >= 1, "clusters must be at least 1");
  need(clips >= 1, "clips must be at least 1");
  need(clip_frames >= 2, "clip_frames must be at least 2");
  need(clip_height >= 4 && clip_width >= 4, "clip_height and clip_width must be at least 4");
  need(clip_height == clip_width, "clip_height must equal clip_width (weak augmentation rotates clips)");
  need(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  need(psd_pad >= 1, "psd_pad must be at least 1");
  need(eval_window_s > 0.0, "eval_window_s must be positive");
  config_detail::parse_widths(widths);
}

/// Applies one `key = value` assignment.
inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  config_detail::field(config_detail::trim(key)).set(c, config_detail::trim(value));
}

/// `key = value` lines; `#` starts a comment. Unknown or repeated keys are
/// errors.
inline TrainConfig parse_config(std::istream& is, const std::string& name = "config", TrainConfig c = {}) {
  std::string line;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = name + ":" + std::to_string(lineno) + ": ";
    require(eq != std::string::npos, ErrorCode::config, where + "expected key = value");
    const std::string key = config_detail::trim(line.substr(0, eq));
    require(seen.insert(key).second, ErrorCode::config, where + "duplicate key '" + key + "'");
    try {
      set_config_value(c, key, line.substr(eq + 1));
    } catch (const Error& e) {
      fail(ErrorCode::config, where + e.what());
    }
  }
  return c;
}

inline TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::config, "cannot open config " + path.string());
  return parse_config(is, path.string());
}

inline constexpr const char* kEnvPrefix = "DDRPPG_";

/// Overrides from DDRPPG_<KEY> variables (key upper-cased).
inline void apply_env_overrides(TrainConfig& c, const std::function<const char*(const char*)>& getenv_fn = std::getenv) {
  for (const auto& f : config_detail::schema()) {
    std::string var = kEnvPrefix;
    for (const char* p = f.key; *p; ++p) var += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    if (const char* v = getenv_fn(var.c_str())) {
      try {
        f.set(c, config_detail::trim(v));
      } catch (const Error& e) {
        fail(ErrorCode::config, var + ": " + e.what());
      }
    }
  }
}

inline std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  for (const auto& f : config_detail::schema()) os << f.key << " = " << f.get(c) << '\n';
  return os.str();
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_detail::schema()) j[f.key] = f.get(c);
  return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) set_config_value(c, it.key(), it.value().get<std::string>());
  return c;
}

}  // namespace ddrppg
