#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "s3/core.hpp"

namespace s3 {

struct EvalReport {
  Representation representation = Representation::Depth;
  std::size_t count = 0;
  double avg = 0.0;
  std::array<double, 5> bad{};  // % with |error| > 1..5, strict
  bool depth_family = false;    // rms, rel and delta are populated
  double rms = 0.0;
  double rel = 0.0;
  std::array<double, 3> delta{};  // % with max(p/g, g/p) < 1.25^i
};

/// Metrics over pixels valid in both fields. Depth-only metrics are computed
/// when the fields hold depth.
EvalReport evaluate(const DenseField& pred, const DenseField& gt);

struct ImprovementReport {
  std::vector<double> thresholds;
  std::vector<double> percent;  // % of pixels whose error dropped by more than t
};

inline const std::vector<double> kDefaultImprovementThresholds{0.0, 0.5, 1.0, 2.0};

ImprovementReport improvement(const DenseField& baseline, const DenseField& guided,
                              const DenseField& gt,
                              const std::vector<double>& thresholds = kDefaultImprovementThresholds);

std::string report_csv_header();
std::string report_csv_row(const std::string& label, const EvalReport& report);

/// Aligned plain-text table, one row per labelled report.
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace s3
