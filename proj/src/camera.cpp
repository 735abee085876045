#include "s3/camera.hpp"

#include <cmath>

namespace s3 {

void CameraIntrinsics::validate() const {
  if (!(focal > 0.0) || !std::isfinite(focal)) throw Error("focal length must be positive");
  if (!(baseline > 0.0) || !std::isfinite(baseline)) throw Error("baseline must be positive");
  if (!std::isfinite(cu) || !std::isfinite(cv)) throw Error("principal point must be finite");
}

PointCloud3D::PointCloud3D(int width, int height, std::vector<CloudPoint> points)
    : width_(width), height_(height), points_(std::move(points)) {
  for (const auto& p : points_) {
    if (!(p.z > 0.0)) throw Error("point cloud entries need z > 0");
    if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width) {
      throw Error("point cloud pixel reference out of bounds");
    }
  }
}

namespace {

// f*b/x is its own inverse, so both directions share this.
DenseField reciprocal_field(const DenseField& in, const CameraIntrinsics& cam,
                            Representation from, Representation to) {
  cam.validate();
  if (in.representation() != from) {
    throw Error("expected " + std::string(to_string(from)) + " field, got " +
                std::string(to_string(in.representation())));
  }
  const double fb = cam.focal * cam.baseline;
  std::vector<double> values(in.pixel_count(), 0.0);
  std::vector<std::uint8_t> valid(in.mask().begin(), in.mask().end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid[i]) continue;
    if (!(in.at(i) > 0.0)) throw Error("zero or negative value cannot be triangulated");
    values[i] = fb / in.at(i);
  }
  return DenseField(in.width(), in.height(), to, std::move(values), std::move(valid));
}

SparseSignalMap reciprocal_sparse(const SparseSignalMap& in, const CameraIntrinsics& cam,
                                  Representation from, Representation to) {
  cam.validate();
  if (in.representation() != from) throw Error("sparse map representation mismatch");
  const double fb = cam.focal * cam.baseline;
  std::vector<SparsePoint> points(in.points().begin(), in.points().end());
  for (auto& p : points) p.value = fb / p.value;
  return SparseSignalMap(in.width(), in.height(), to, std::move(points));
}

}  // namespace

DenseField disparity_to_depth(const DenseField& disparity, const CameraIntrinsics& cam) {
  return reciprocal_field(disparity, cam, Representation::Disparity, Representation::Depth);
}

DenseField depth_to_disparity(const DenseField& depth, const CameraIntrinsics& cam) {
  return reciprocal_field(depth, cam, Representation::Depth, Representation::Disparity);
}

SparseSignalMap disparity_to_depth(const SparseSignalMap& disparity, const CameraIntrinsics& cam) {
  return reciprocal_sparse(disparity, cam, Representation::Disparity, Representation::Depth);
}

SparseSignalMap depth_to_disparity(const SparseSignalMap& depth, const CameraIntrinsics& cam) {
  return reciprocal_sparse(depth, cam, Representation::Depth, Representation::Disparity);
}

PointCloud3D backproject(const DenseField& depth, const CameraIntrinsics& cam) {
  cam.validate();
  if (depth.representation() != Representation::Depth) {
    throw Error("backproject needs a depth field");
  }
  std::vector<CloudPoint> points;
  points.reserve(depth.valid_count());
  for (int i = 0; i < depth.height(); ++i) {
    for (int j = 0; j < depth.width(); ++j) {
      if (!depth.valid(i, j)) continue;
      const double z = depth.at(i, j);
      points.push_back({(j - cam.cu) * z / cam.focal, (i - cam.cv) * z / cam.focal, z, i, j});
    }
  }
  return PointCloud3D(depth.width(), depth.height(), std::move(points));
}

SparseSignalMap project(const PointCloud3D& cloud, const CameraIntrinsics& cam) {
  cam.validate();
  const int width = cloud.width();
  const int height = cloud.height();
  // z-buffer: nearest point wins when two land on one pixel.
  std::vector<double> zbuf(static_cast<std::size_t>(width) * height, 0.0);
  for (const auto& p : cloud.points()) {
    const double u = p.x * cam.focal / p.z + cam.cu;
    const double v = p.y * cam.focal / p.z + cam.cv;
    const long col = std::lround(u);
    const long row = std::lround(v);
    if (row < 0 || row >= height || col < 0 || col >= width) continue;
    auto& slot = zbuf[static_cast<std::size_t>(row) * width + col];
    if (slot == 0.0 || p.z < slot) slot = p.z;
  }
  std::vector<SparsePoint> points;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double z = zbuf[static_cast<std::size_t>(i) * width + j];
      if (z > 0.0) points.push_back({i, j, z});
    }
  }
  return SparseSignalMap(width, height, Representation::Depth, std::move(points));
}

}  // namespace s3
