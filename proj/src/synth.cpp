#include "s3/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "s3/random.hpp"

namespace s3 {

namespace {

constexpr double kMinPositive = 1e-3;

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0' || !std::isfinite(v)) {
      throw Error("config key '" + key + "': bad list entry '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}

Color parse_color(const KvConfig& cfg, const std::string& key, const Color& fallback) {
  if (!cfg.contains(key)) {
    cfg.get_string(key, "");
    return fallback;
  }
  const auto v = parse_list(key, cfg.get_string(key, ""));
  if (v.size() != 3) throw Error("config key '" + key + "': expected r,g,b");
  return {v[0], v[1], v[2]};
}

void check_color(const Color& c, const char* what) {
  for (double v : c) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(what) + " color outside [0,1]");
  }
}

const Color kPalette[] = {
    {0.85, 0.25, 0.20}, {0.20, 0.30, 0.80}, {0.90, 0.80, 0.20},
    {0.60, 0.20, 0.70}, {0.15, 0.75, 0.70}, {0.95, 0.55, 0.75},
};

}  // namespace

CameraIntrinsics SceneSpec::intrinsics() const {
  return {focal, (width - 1) / 2.0, (height - 1) / 2.0, baseline};
}

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw Error("scene dimensions must be >= 1");
  intrinsics().validate();
  if (!(far_depth > 0.0) || !std::isfinite(far_depth)) throw Error("far depth must be > 0");
  if (ground && !(camera_height > 0.0)) throw Error("camera height must be > 0");
  if (!std::isfinite(slope_x) || !std::isfinite(slope_z)) throw Error("ground slopes must be finite");
  if (!(texture_noise >= 0.0 && texture_noise <= 0.5)) {
    throw Error("texture noise must be in [0, 0.5]");
  }
  if (random_boxes < 0) throw Error("random box count must be >= 0");
  check_color(ground_color, "ground");
  check_color(wall_color, "wall");
  for (const auto& b : boxes) {
    if (b.rows < 1 || b.cols < 1) throw Error("box size must be >= 1");
    if (!(b.depth > 0.0 && b.depth < far_depth)) {
      throw Error("box depth must lie in (0, far depth)");
    }
    check_color(b.color, "box");
  }
}

SceneSpec SceneSpec::from_config(const KvConfig& cfg) {
  SceneSpec s;
  s.width = cfg.get_int("width", s.width);
  s.height = cfg.get_int("height", s.height);
  s.focal = cfg.get_double("focal", s.focal);
  s.baseline = cfg.get_double("baseline", s.baseline);
  s.ground = cfg.get_bool("ground", s.ground);
  s.camera_height = cfg.get_double("camera_height", s.camera_height);
  s.slope_x = cfg.get_double("slope_x", s.slope_x);
  s.slope_z = cfg.get_double("slope_z", s.slope_z);
  s.far_depth = cfg.get_double("far_depth", s.far_depth);
  s.texture_noise = cfg.get_double("texture_noise", s.texture_noise);
  s.random_boxes = cfg.get_int("random_boxes", s.random_boxes);
  s.ground_color = parse_color(cfg, "ground_color", s.ground_color);
  s.wall_color = parse_color(cfg, "wall_color", s.wall_color);
  for (int k = 0;; ++k) {
    const std::string key = "box" + std::to_string(k);
    if (!cfg.contains(key)) break;
    const auto v = parse_list(key, cfg.get_string(key, ""));
    if (v.size() != 5 && v.size() != 8) {
      throw Error("config key '" + key + "': expected top,left,rows,cols,depth[,r,g,b]");
    }
    BoxSpec b;
    b.top = static_cast<int>(v[0]);
    b.left = static_cast<int>(v[1]);
    b.rows = static_cast<int>(v[2]);
    b.cols = static_cast<int>(v[3]);
    b.depth = v[4];
    b.color = v.size() == 8 ? Color{v[5], v[6], v[7]} : kPalette[k % std::size(kPalette)];
    s.boxes.push_back(b);
  }
  s.validate();
  return s;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const auto cam = spec.intrinsics();
  const int w = spec.width;
  const int h = spec.height;
  const auto n = static_cast<std::size_t>(w) * h;
  Rng rng(spec.seed);

  auto ground_depth = [&](int i, int j) {
    constexpr double kNone = std::numeric_limits<double>::infinity();
    if (!spec.ground) return kNone;
    const double denom =
        (i - cam.cv) / cam.focal - spec.slope_x * (j - cam.cu) / cam.focal - spec.slope_z;
    return denom > 0.0 ? spec.camera_height / denom : kNone;
  };

  std::vector<BoxSpec> boxes = spec.boxes;
  for (int k = 0; k < spec.random_boxes; ++k) {
    BoxSpec b;
    b.depth = rng.uniform(0.15, 0.45) * spec.far_depth;
    b.rows = std::max(1, static_cast<int>(std::lround(rng.uniform(0.2, 0.4) * h)));
    b.cols = std::max(1, static_cast<int>(std::lround(rng.uniform(0.12, 0.25) * w)));
    b.left = static_cast<int>(rng.index(static_cast<std::uint64_t>(std::max(1, w - b.cols + 1))));
    // Stand the box on the ground where the plane reaches its depth.
    int foot = h - 1;
    if (spec.ground) {
      const int mid = std::clamp(b.left + b.cols / 2, 0, w - 1);
      for (int i = 0; i < h; ++i) {
        if (ground_depth(i, mid) <= b.depth) {
          foot = i;
          break;
        }
      }
    } else {
      foot = static_cast<int>(rng.index(static_cast<std::uint64_t>(h)));
    }
    b.top = foot - b.rows + 1;
    const auto& base = kPalette[(spec.boxes.size() + k) % std::size(kPalette)];
    for (int c = 0; c < 3; ++c) b.color[c] = std::clamp(base[c] + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    boxes.push_back(b);
  }

  std::vector<double> depth(n);
  std::vector<int> labels(n);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const auto idx = static_cast<std::size_t>(i) * w + j;
      const double zg = ground_depth(i, j);
      if (zg < spec.far_depth) {
        depth[idx] = zg;
        labels[idx] = kGroundLabel;
      } else {
        depth[idx] = spec.far_depth;
        labels[idx] = kWallLabel;
      }
      for (std::size_t k = 0; k < boxes.size(); ++k) {
        const auto& b = boxes[k];
        if (i >= b.top && i < b.top + b.rows && j >= b.left && j < b.left + b.cols &&
            b.depth < depth[idx]) {
          depth[idx] = b.depth;
          labels[idx] = kFirstBoxLabel + static_cast<int>(k);
        }
      }
    }
  }

  std::vector<double> pixels(n * 3);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const int label = labels[idx];
    const Color& base = label == kGroundLabel ? spec.ground_color
                        : label == kWallLabel ? spec.wall_color
                                             : boxes[label - kFirstBoxLabel].color;
    for (int c = 0; c < 3; ++c) {
      const double noise = spec.texture_noise > 0.0
                               ? rng.uniform(-spec.texture_noise, spec.texture_noise)
                               : 0.0;
      pixels[idx * 3 + c] = std::clamp(base[c] + noise, 0.0, 1.0);
    }
  }

  return Scene{IntensityImage(w, h, 3, std::move(pixels)),
               DenseField(w, h, Representation::Depth, std::move(depth),
                          std::vector<std::uint8_t>(n, 1)),
               cam, std::move(labels)};
}

std::vector<double> region_gradient_bounds(const DenseField& field, const std::vector<int>& labels) {
  if (labels.size() != field.pixel_count()) throw Error("label map size mismatch");
  const int max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  std::vector<double> bound(static_cast<std::size_t>(max_label) + 1, 0.0);
  for (int i = 0; i < field.height(); ++i) {
    for (int j = 0; j < field.width(); ++j) {
      const auto a = field.index(i, j);
      for (const auto& [di, dj] : {std::pair{0, 1}, std::pair{1, 0}}) {
        if (i + di >= field.height() || j + dj >= field.width()) continue;
        const auto b = field.index(i + di, j + dj);
        if (labels[a] != labels[b] || !field.valid(a) || !field.valid(b)) continue;
        auto& bd = bound[static_cast<std::size_t>(labels[a])];
        bd = std::max(bd, std::abs(field.at(a) - field.at(b)));
      }
    }
  }
  return bound;
}

void CorruptionSpec::validate() const {
  if (!(bias >= 0.0) || !std::isfinite(bias)) throw Error("bias must be >= 0");
  if (!(bias_min_fraction >= 0.0 && bias_min_fraction <= 1.0)) {
    throw Error("bias region fraction must be in [0,1]");
  }
  if (edge_radius < 0) throw Error("edge radius must be >= 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("noise must be >= 0");
  if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0)) throw Error("outlier rate must be in [0,1]");
  if (!(outlier_magnitude >= 0.0) || !std::isfinite(outlier_magnitude)) {
    throw Error("outlier magnitude must be >= 0");
  }
}

CorruptionSpec CorruptionSpec::from_config(const KvConfig& cfg) {
  CorruptionSpec c;
  c.bias = cfg.get_double("bias", c.bias);
  c.bias_min_fraction = cfg.get_double("bias_min_fraction", c.bias_min_fraction);
  c.edge_radius = cfg.get_int("edge_radius", c.edge_radius);
  c.noise_sigma = cfg.get_double("noise", c.noise_sigma);
  c.outlier_rate = cfg.get_double("outlier_rate", c.outlier_rate);
  c.outlier_magnitude = cfg.get_double("outlier_magnitude", c.outlier_magnitude);
  c.validate();
  return c;
}

DenseField corrupt(const DenseField& truth, const std::vector<int>& labels_in,
                   const CorruptionSpec& spec) {
  spec.validate();
  if (truth.representation() == Representation::Unitless) {
    throw Error("corrupt needs a depth or disparity field");
  }
  const auto n = truth.pixel_count();
  const std::vector<int> labels = labels_in.empty() ? std::vector<int>(n, 0) : labels_in;
  if (labels.size() != n) throw Error("label map size mismatch");
  const bool nearer_is_larger = truth.representation() == Representation::Disparity;
  Rng rng(spec.seed);

  std::vector<double> biased(truth.values().begin(), truth.values().end());
  if (spec.bias > 0.0) {
    std::vector<std::size_t> area;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] < 0) throw Error("labels must be >= 0");
      const auto l = static_cast<std::size_t>(labels[i]);
      if (area.size() <= l) area.resize(l + 1, 0);
      ++area[l];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<double>(area[labels[i]]) >= spec.bias_min_fraction * static_cast<double>(n)) {
        biased[i] += spec.bias;
      }
    }
  }

  std::vector<double> out = biased;
  if (spec.edge_radius > 0 && !labels_in.empty()) {
    const int r = spec.edge_radius;
    const int w = truth.width();
    for (int i = 0; i < truth.height(); ++i) {
      for (int j = 0; j < w; ++j) {
        const auto p = truth.index(i, j);
        if (!truth.valid(p)) continue;
        int best_d2 = r * r + 1;
        std::size_t best = p;
        for (int di = -r; di <= r; ++di) {
          for (int dj = -r; dj <= r; ++dj) {
            const int d2 = di * di + dj * dj;
            const int qi = i + di;
            const int qj = j + dj;
            if (d2 > r * r || d2 >= best_d2 || qi < 0 || qj < 0 || qi >= truth.height() ||
                qj >= w) {
              continue;
            }
            const auto q = truth.index(qi, qj);
            if (!truth.valid(q) || labels[q] == labels[p]) continue;
            const bool foreground =
                nearer_is_larger ? truth.at(q) > truth.at(p) : truth.at(q) < truth.at(p);
            if (!foreground) continue;
            best_d2 = d2;
            best = q;
          }
        }
        out[p] = biased[best];
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (std::size_t i = 0; i < n; ++i) out[i] += spec.noise_sigma * rng.normal();
  }

  if (spec.outlier_rate > 0.0 && spec.outlier_magnitude > 0.0) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    const auto count = static_cast<std::size_t>(std::llround(spec.outlier_rate * n));
    for (std::size_t k = 0; k < count; ++k) {
      const auto i = order[k];
      double delta = rng.uniform01() < 0.5 ? -spec.outlier_magnitude : spec.outlier_magnitude;
      if (out[i] + delta <= kMinPositive) delta = spec.outlier_magnitude;
      out[i] += delta;
    }
  }

  std::vector<std::uint8_t> valid(truth.mask().begin(), truth.mask().end());
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) {
      out[i] = 0.0;
      continue;
    }
    out[i] = std::max(out[i], kMinPositive);
  }
  return DenseField(truth.width(), truth.height(), truth.representation(), std::move(out),
                    std::move(valid));
}

namespace {

SparseSignalMap points_from_indices(const DenseField& truth, std::vector<std::size_t> chosen) {
  std::sort(chosen.begin(), chosen.end());
  std::vector<SparsePoint> points;
  points.reserve(chosen.size());
  for (auto idx : chosen) {
    const int row = static_cast<int>(idx / truth.width());
    const int col = static_cast<int>(idx % truth.width());
    points.push_back({row, col, truth.at(idx)});
  }
  return SparseSignalMap(truth.width(), truth.height(), truth.representation(), std::move(points));
}

void require_signal(const DenseField& truth) {
  if (truth.representation() == Representation::Unitless) {
    throw Error("sampling needs a depth or disparity field");
  }
}

}  // namespace

SparseSignalMap sample_uniform(const DenseField& truth, double rate, std::uint64_t seed) {
  require_signal(truth);
  if (!(rate > 0.0 && rate <= 1.0)) throw Error("sample rate must be in (0,1]");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < truth.pixel_count(); ++i) {
    if (truth.valid(i)) valid.push_back(i);
  }
  const auto count = static_cast<std::size_t>(std::llround(rate * valid.size()));
  Rng rng(seed);
  rng.shuffle(valid);
  valid.resize(count);
  return points_from_indices(truth, std::move(valid));
}

SparseSignalMap sample_beams(const DenseField& truth, const CameraIntrinsics& cam, int beam_count,
                             double elevation_step_deg, std::uint64_t seed) {
  require_signal(truth);
  cam.validate();
  if (beam_count < 1) throw Error("beam count must be >= 1");
  if (!(elevation_step_deg > 0.0) || !std::isfinite(elevation_step_deg)) {
    throw Error("elevation step must be > 0");
  }
  // Elevation does not depend on z, so the pixel ray is enough.
  std::vector<std::size_t> pixels;
  std::vector<double> elevation;
  for (int i = 0; i < truth.height(); ++i) {
    for (int j = 0; j < truth.width(); ++j) {
      if (!truth.valid(i, j)) continue;
      const double x = (j - cam.cu) / cam.focal;
      const double y = (i - cam.cv) / cam.focal;
      pixels.push_back(truth.index(i, j));
      elevation.push_back(std::atan2(-y, std::hypot(x, 1.0)) * 180.0 / std::numbers::pi);
    }
  }
  if (pixels.empty()) throw Error("empty beams: no valid pixels");
  const double e_min = *std::min_element(elevation.begin(), elevation.end());
  std::vector<long> band(pixels.size());
  long total = 0;
  for (std::size_t p = 0; p < pixels.size(); ++p) {
    band[p] = static_cast<long>(std::floor((elevation[p] - e_min) / elevation_step_deg));
    total = std::max(total, band[p] + 1);
  }
  if (beam_count >= total) return points_from_indices(truth, std::move(pixels));

  Rng rng(seed);
  const double spacing = static_cast<double>(total) / beam_count;
  const double phase = rng.uniform01() * spacing;
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(total), 0);
  for (int b = 0; b < beam_count; ++b) {
    const auto k = static_cast<long>(std::floor(phase + b * spacing));
    keep[static_cast<std::size_t>(std::min(k, total - 1))] = 1;
  }
  std::vector<std::size_t> chosen;
  for (std::size_t p = 0; p < pixels.size(); ++p) {
    if (keep[static_cast<std::size_t>(band[p])]) chosen.push_back(pixels[p]);
  }
  if (chosen.empty()) throw Error("empty beams: no pixel falls into the selected bands");
  return points_from_indices(truth, std::move(chosen));
}

SparseSignalMap sample_radar(const DenseField& truth, RowBand band, int count, std::uint64_t seed) {
  require_signal(truth);
  if (count < 1) throw Error("radar point count must be >= 1");
  if (band.first < 0 || band.last >= truth.height() || band.first > band.last) {
    throw Error("radar row band outside the image");
  }
  std::vector<std::size_t> candidates;
  for (int i = band.first; i <= band.last; ++i) {
    for (int j = 0; j < truth.width(); ++j) {
      if (truth.valid(i, j)) candidates.push_back(truth.index(i, j));
    }
  }
  if (candidates.size() < static_cast<std::size_t>(count)) {
    throw Error("radar band holds " + std::to_string(candidates.size()) +
                " valid pixels, fewer than the requested " + std::to_string(count));
  }
  Rng rng(seed);
  rng.shuffle(candidates);
  candidates.resize(static_cast<std::size_t>(count));
  return points_from_indices(truth, std::move(candidates));
}

CostVolume build_cost_volume(const DenseField& disparity, int disparities, int features,
                             double sharpness, std::uint64_t seed, const CostVolumeStyle& style) {
  if (disparity.representation() != Representation::Disparity) {
    throw Error("cost volume needs a disparity field");
  }
  if (disparities < 1 || features < 1) throw Error("cost volume needs D_max >= 1 and F >= 1");
  if (!(sharpness > 0.0) || !std::isfinite(sharpness)) throw Error("sharpness must be > 0");
  if (!(style.noise >= 0.0) || !std::isfinite(style.amplitude) || !std::isfinite(style.floor)) {
    throw Error("invalid cost volume style");
  }
  const int h = disparity.height();
  const int w = disparity.width();
  std::vector<float> data(static_cast<std::size_t>(h) * w * disparities * features);
  Rng rng(seed);
  std::size_t at = 0;
  const double s2 = sharpness * sharpness;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const bool valid = disparity.valid(i, j);
      const double center = valid ? disparity.at(i, j) : 0.0;
      if (valid && !(center >= 0.0 && center < disparities)) {
        throw Error("disparity out of range: " + std::to_string(center) + " at (" +
                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
      for (int d = 0; d < disparities; ++d) {
        const double diff = d - center;
        const double bump = valid ? style.amplitude * std::exp(-diff * diff * s2 / 2.0) : 0.0;
        for (int f = 0; f < features; ++f) {
          const double noise = style.noise > 0.0 ? style.noise * rng.normal() : 0.0;
          data[at++] = static_cast<float>(style.floor + bump + noise);
        }
      }
    }
  }
  return CostVolume(h, w, disparities, features, std::move(data));
}

}  // namespace s3
