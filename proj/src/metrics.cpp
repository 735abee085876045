#include "s3/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace s3 {

namespace {

void check_pair(const DenseField& a, const DenseField& b) {
  require_same_dims(a, b, "evaluation");
  if (a.representation() != b.representation()) {
    throw Error("representation mismatch between prediction and ground truth");
  }
}

}  // namespace

EvalReport evaluate(const DenseField& pred, const DenseField& gt) {
  check_pair(pred, gt);
  EvalReport r;
  r.representation = gt.representation();
  r.depth_family = r.representation == Representation::Depth;
  std::array<std::size_t, 5> bad{};
  std::array<std::size_t, 3> within{};
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double rel_sum = 0.0;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (!pred.valid(i) || !gt.valid(i)) continue;
    ++r.count;
    const double err = std::abs(pred.at(i) - gt.at(i));
    abs_sum += err;
    for (int n = 1; n <= 5; ++n) {
      if (err > n) ++bad[n - 1];
    }
    if (r.depth_family) {
      if (!(gt.at(i) > 0.0)) throw Error("depth metrics need positive ground truth");
      sq_sum += err * err;
      rel_sum += err / gt.at(i);
      // A non-positive prediction is outside every ratio band.
      const double ratio = pred.at(i) > 0.0
                               ? std::max(pred.at(i) / gt.at(i), gt.at(i) / pred.at(i))
                               : INFINITY;
      double threshold = 1.0;
      for (int k = 0; k < 3; ++k) {
        threshold *= 1.25;
        if (ratio < threshold) ++within[k];
      }
    }
  }
  if (r.count == 0) throw Error("evaluation has zero overlap");
  const double n = static_cast<double>(r.count);
  r.avg = abs_sum / n;
  for (int k = 0; k < 5; ++k) r.bad[k] = 100.0 * bad[k] / n;
  if (r.depth_family) {
    r.rms = std::sqrt(sq_sum / n);
    r.rel = rel_sum / n;
    for (int k = 0; k < 3; ++k) r.delta[k] = 100.0 * within[k] / n;
  }
  return r;
}

ImprovementReport improvement(const DenseField& baseline, const DenseField& guided,
                              const DenseField& gt, const std::vector<double>& thresholds) {
  check_pair(baseline, gt);
  check_pair(guided, gt);
  ImprovementReport r;
  r.thresholds = thresholds;
  std::vector<std::size_t> hits(thresholds.size(), 0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (!baseline.valid(i) || !guided.valid(i) || !gt.valid(i)) continue;
    ++count;
    const double gain = std::abs(baseline.at(i) - gt.at(i)) - std::abs(guided.at(i) - gt.at(i));
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (gain > thresholds[t]) ++hits[t];
    }
  }
  if (count == 0) throw Error("improvement analysis has zero overlap");
  for (auto h : hits) r.percent.push_back(100.0 * h / count);
  return r;
}

std::string report_csv_header() {
  return "label,repr,count,avg,bad1,bad2,bad3,bad4,bad5,rms,rel,delta1,delta2,delta3";
}

std::string report_csv_row(const std::string& label, const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", label.c_str(),
                std::string(to_string(r.representation)).c_str(), r.count, r.avg, r.bad[0],
                r.bad[1], r.bad[2], r.bad[3], r.bad[4]);
  std::string out = buf;
  if (r.depth_family) {
    std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g,%.9g,%.9g", r.rms, r.rel, r.delta[0],
                  r.delta[1], r.delta[2]);
    out += buf;
  } else {
    out += ",,,,,";
  }
  return out;
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t label_width = 5;
  bool any_depth = false;
  for (const auto& [label, r] : rows) {
    label_width = std::max(label_width, label.size());
    any_depth = any_depth || r.depth_family;
  }
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %7s %7s %7s %7s %7s", static_cast<int>(label_width),
                "label", "Avg", ">1", ">2", ">3", ">4", ">5");
  out += buf;
  if (any_depth) {
    std::snprintf(buf, sizeof(buf), " %8s %7s %7s %7s %7s", "RMS", "REL", "d1", "d2", "d3");
    out += buf;
  }
  out += '\n';
  for (const auto& [label, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %8.4f %7.2f %7.2f %7.2f %7.2f %7.2f",
                  static_cast<int>(label_width), label.c_str(), r.avg, r.bad[0], r.bad[1],
                  r.bad[2], r.bad[3], r.bad[4]);
    out += buf;
    if (r.depth_family) {
      std::snprintf(buf, sizeof(buf), " %8.4f %7.4f %7.2f %7.2f %7.2f", r.rms, r.rel, r.delta[0],
                    r.delta[1], r.delta[2]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace s3
