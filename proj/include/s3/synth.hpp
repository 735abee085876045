#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "s3/camera.hpp"
#include "s3/core.hpp"
#include "s3/kv_config.hpp"

namespace s3 {

using Color = std::array<double, 3>;

/// Fronto-parallel box given by its image rectangle and depth.
struct BoxSpec {
  int top = 0;
  int left = 0;
  int rows = 1;
  int cols = 1;
  double depth = 5.0;
  Color color{0.8, 0.3, 0.2};
};

/// Piecewise planar scene: a slanted ground plane y = camera_height + slope_x * x +
/// slope_z * z, a back wall at far_depth and a list of boxes.
struct SceneSpec {
  int width = 64;
  int height = 48;
  std::uint64_t seed = 0;
  double focal = 60.0;
  double baseline = 1.0;
  bool ground = true;
  double camera_height = 1.5;
  double slope_x = 0.0;
  double slope_z = 0.0;
  double far_depth = 30.0;
  Color ground_color{0.35, 0.45, 0.30};
  Color wall_color{0.60, 0.70, 0.85};
  double texture_noise = 0.02;  // uniform amplitude added per channel
  std::vector<BoxSpec> boxes;
  int random_boxes = 0;  // extra boxes drawn from the seed

  CameraIntrinsics intrinsics() const;
  void validate() const;

  /// Keys: width height focal baseline ground camera_height slope_x slope_z
  /// far_depth texture_noise random_boxes ground_color wall_color box0 box1 ...
  /// Colors are `r,g,b`; boxes are `top,left,rows,cols,depth[,r,g,b]`.
  static SceneSpec from_config(const KvConfig& cfg);
};

inline constexpr int kGroundLabel = 0;
inline constexpr int kWallLabel = 1;
inline constexpr int kFirstBoxLabel = 2;

struct Scene {
  IntensityImage image;
  DenseField depth;  // ground truth, valid everywhere
  CameraIntrinsics camera;
  std::vector<int> labels;  // per pixel: ground, wall, or box index + kFirstBoxLabel
};

Scene generate_scene(const SceneSpec& spec);

/// Largest |depth difference| between 4-adjacent pixels sharing a label, per label.
std::vector<double> region_gradient_bounds(const DenseField& field, const std::vector<int>& labels);

struct CorruptionSpec {
  double bias = 0.0;                // added on large regions
  double bias_min_fraction = 0.25;  // region area threshold, fraction of the image
  int edge_radius = 0;              // foreground values bleed this far across label edges
  double noise_sigma = 0.0;
  double outlier_rate = 0.0;
  double outlier_magnitude = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Keys: bias bias_min_fraction edge_radius noise outlier_rate outlier_magnitude.
  static CorruptionSpec from_config(const KvConfig& cfg);
};

/// Simulated prediction D from ground truth. `labels` may be empty, in which case
/// the whole image is one region and no edges are fattened. Values are kept > 0.
DenseField corrupt(const DenseField& truth, const std::vector<int>& labels,
                   const CorruptionSpec& spec);

/// Exactly round(rate * valid) valid pixels, in raster order.
SparseSignalMap sample_uniform(const DenseField& truth, double rate, std::uint64_t seed);

/// Pixels whose elevation atan2(-y, sqrt(x^2 + z^2)) falls into beam_count of
/// the step-wide elevation bands, spread evenly with a seeded phase. Accepts depth
/// or disparity and returns the same representation.
SparseSignalMap sample_beams(const DenseField& truth, const CameraIntrinsics& cam, int beam_count,
                             double elevation_step_deg, std::uint64_t seed);

/// Inclusive row range.
struct RowBand {
  int first = 0;
  int last = 0;
};

SparseSignalMap sample_radar(const DenseField& truth, RowBand band, int count, std::uint64_t seed);

struct CostVolumeStyle {
  double noise = 0.0;       // sigma of the per-feature Gaussian noise
  double amplitude = 16.0;  // bump height
  double floor = 30.0;      // constant evidence level, keeps every feature positive
};

/// Per pixel and feature: floor + amplitude * exp(-(d - D)^2 * sharpness^2 / 2) + noise.
CostVolume build_cost_volume(const DenseField& disparity, int disparities, int features,
                             double sharpness, std::uint64_t seed,
                             const CostVolumeStyle& style = {});

}  // namespace s3
