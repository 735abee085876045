#pragma once

#include <vector>

#include "s3/core.hpp"

namespace s3 {

/// Rectified pinhole camera with a stereo baseline.
struct CameraIntrinsics {
  double focal = 0.0;     // pixels
  double cu = 0.0;        // principal point column
  double cv = 0.0;        // principal point row
  double baseline = 0.0;  // meters

  void validate() const;
};

struct CloudPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  int row = 0;
  int col = 0;
};

class PointCloud3D {
 public:
  PointCloud3D(int width, int height, std::vector<CloudPoint> points);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const CloudPoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  int width_;
  int height_;
  std::vector<CloudPoint> points_;
};

// depth = f * b / disparity on valid pixels.
DenseField disparity_to_depth(const DenseField& disparity, const CameraIntrinsics& cam);
DenseField depth_to_disparity(const DenseField& depth, const CameraIntrinsics& cam);
SparseSignalMap disparity_to_depth(const SparseSignalMap& disparity, const CameraIntrinsics& cam);
SparseSignalMap depth_to_disparity(const SparseSignalMap& depth, const CameraIntrinsics& cam);

/// Valid pixels of a depth field as camera-frame points, in raster order.
PointCloud3D backproject(const DenseField& depth, const CameraIntrinsics& cam);
/// Points projected back to their pixels, z as the depth value.
SparseSignalMap project(const PointCloud3D& cloud, const CameraIntrinsics& cam);

}  // namespace s3
