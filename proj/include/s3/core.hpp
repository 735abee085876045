#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace s3 {

/// Invalid input, configuration or file content. Maps to CLI exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver divergence or a non-finite objective. Maps to CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed file payload; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

enum class Representation { Depth, Disparity, Unitless };

std::string_view to_string(Representation repr);
Representation parse_representation(std::string_view text);

/// Row-major color or gray image with values in [0,1].
class IntensityImage {
 public:
  IntensityImage(int width, int height, int channels, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::span<const double> values() const { return values_; }

  double at(int row, int col, int channel = 0) const {
    return values_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }

  /// Largest absolute per-channel difference between two pixels.
  double max_channel_diff(int r0, int c0, int r1, int c1) const;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<double> values_;
};

struct SparsePoint {
  int row = 0;
  int col = 0;
  double value = 0.0;

  friend bool operator==(const SparsePoint&, const SparsePoint&) = default;
};

/// Sparse observations stored as a point list. The position of a point in
/// the list is its source index k.
class SparseSignalMap {
 public:
  SparseSignalMap(int width, int height, Representation repr, std::vector<SparsePoint> points);

  int width() const { return width_; }
  int height() const { return height_; }
  Representation representation() const { return repr_; }
  std::span<const SparsePoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Source index at a pixel, if any.
  std::optional<std::size_t> find(int row, int col) const;

 private:
  int width_;
  int height_;
  Representation repr_;
  std::vector<SparsePoint> points_;
  std::vector<std::int32_t> lookup_;  // pixel -> source index or -1
};

/// Dense H x W scalar field with an explicit validity mask.
class DenseField {
 public:
  DenseField(int width, int height, Representation repr, std::vector<double> values,
             std::vector<std::uint8_t> valid);

  static DenseField filled(int width, int height, Representation repr, double value);
  static DenseField all_invalid(int width, int height, Representation repr);
  static DenseField from_sparse(const SparseSignalMap& sparse);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return values_.size(); }
  Representation representation() const { return repr_; }
  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return valid_; }

  double at(int row, int col) const { return values_[index(row, col)]; }
  bool valid(int row, int col) const { return valid_[index(row, col)] != 0; }
  double at(std::size_t idx) const { return values_[idx]; }
  bool valid(std::size_t idx) const { return valid_[idx] != 0; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  std::size_t valid_count() const;

  DenseField with_representation(Representation repr) const;

  friend bool operator==(const DenseField&, const DenseField&) = default;

 private:
  int width_;
  int height_;
  Representation repr_;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

/// One source point's confidence patch, clipped to the image.
struct ConfidencePatch {
  std::size_t source = 0;
  int row = 0;
  int col = 0;
  int half_size = 0;
  double source_value = 0.0;
  // Clipped footprint in image coordinates.
  int top = 0;
  int left = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // rows x cols, row-major

  bool covers(int r, int c) const {
    return r >= top && r < top + rows && c >= left && c < left + cols;
  }
  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r - top) * cols + (c - left)];
  }
  double& at(int r, int c) {
    return values[static_cast<std::size_t>(r - top) * cols + (c - left)];
  }

  /// Zero-filled patch of half-size L around (row, col), clipped to width x height.
  static ConfidencePatch empty_around(std::size_t source, int row, int col, double value,
                                      int half_size, int width, int height);
};

/// H x W x D_max x F volume, stored row-major in that index order.
class CostVolume {
 public:
  CostVolume(int height, int width, int disparities, int features, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int disparities() const { return disparities_; }
  int features() const { return features_; }
  std::span<const float> data() const { return data_; }

  std::size_t index(int row, int col, int d, int f) const {
    return ((static_cast<std::size_t>(row) * width_ + col) * disparities_ + d) * features_ + f;
  }
  float at(int row, int col, int d, int f = 0) const { return data_[index(row, col, d, f)]; }

  friend bool operator==(const CostVolume&, const CostVolume&) = default;

 private:
  int height_;
  int width_;
  int disparities_;
  int features_;
  std::vector<float> data_;
};

void require_same_dims(const DenseField& a, const DenseField& b, std::string_view what);

}  // namespace s3
