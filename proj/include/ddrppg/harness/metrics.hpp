#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/loss/losses.hpp"
#include "ddrppg/signal/correlation.hpp"
#include "ddrppg/signal/trace_csv.hpp"

namespace ddrppg {

/// One training-log line: loss means over the steps of an epoch.
struct MetricsRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  int stage = 1;
  double l_nc = 0.0, l_kcn = 0.0, l_cr_hat = 0.0, l_dcr = 0.0, total = 0.0;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr const char* kMetricsHeader = "epoch,step,stage,l_nc,l_kcn,l_cr_hat,l_dcr,total";

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows)
    os << r.epoch << ',' << r.step << ',' << r.stage << ',' << format_double(r.l_nc) << ',' << format_double(r.l_kcn)
       << ',' << format_double(r.l_cr_hat) << ',' << format_double(r.l_dcr) << ',' << format_double(r.total) << '\n';
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::io, "cannot write " + path.string());
  write_metrics_csv(os, rows);
}

inline std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io, "cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  require(line == kMetricsHeader, ErrorCode::parse, path.string() + ": bad metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t end; (end = line.find(',', start)) != std::string::npos; start = end + 1)
      f.push_back(line.substr(start, end - start));
    f.push_back(line.substr(start));
    require(f.size() == 8, ErrorCode::parse, path.string() + ": 8 fields expected");
    MetricsRow r;
    r.epoch = static_cast<std::size_t>(parse_double(f[0]));
    r.step = static_cast<std::size_t>(parse_double(f[1]));
    r.stage = static_cast<int>(parse_double(f[2]));
    r.l_nc = parse_double(f[3]);
    r.l_kcn = parse_double(f[4]);
    r.l_cr_hat = parse_double(f[5]);
    r.l_dcr = parse_double(f[6]);
    r.total = parse_double(f[7]);
    rows.push_back(r);
  }
  return rows;
}

struct HrMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  /// Pearson R; when either side is constant, 1 for an exact match and 0
  /// otherwise.
  double r = 0.0;
  std::size_t count = 0;
};

inline HrMetrics hr_metrics(const std::vector<double>& predicted, const std::vector<double>& truth) {
  require(predicted.size() == truth.size(), ErrorCode::shape_mismatch, "prediction and truth counts differ");
  require(!predicted.empty(), ErrorCode::empty_eval, "no windows to score");
  HrMetrics m;
  m.count = predicted.size();
  double se = 0.0;
  bool exact = true;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - truth[i];
    m.mae += std::abs(e);
    se += e * e;
    exact = exact && e == 0.0;
  }
  const auto n = static_cast<double>(m.count);
  m.mae /= n;
  m.rmse = std::sqrt(se / n);
  try {
    m.r = pearson(predicted, truth);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::zero_variance) throw;
    m.r = exact ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace ddrppg
