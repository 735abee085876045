#include "s3/core.hpp"

#include <algorithm>
#include <cmath>

namespace s3 {

FormatError::FormatError(const std::string& what, std::size_t offset)
    : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

std::string_view to_string(Representation repr) {
  switch (repr) {
    case Representation::Depth:
      return "depth";
    case Representation::Disparity:
      return "disparity";
    case Representation::Unitless:
      return "unitless";
  }
  return "unknown";
}

Representation parse_representation(std::string_view text) {
  if (text == "depth") return Representation::Depth;
  if (text == "disparity") return Representation::Disparity;
  if (text == "unitless" || text == "confidence") return Representation::Unitless;
  throw Error("unknown representation '" + std::string(text) + "'");
}

namespace {

void require_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error("dimensions must be positive, got " + std::to_string(width) + "x" +
                std::to_string(height));
  }
}

}  // namespace

IntensityImage::IntensityImage(int width, int height, int channels, std::vector<double> values)
    : width_(width), height_(height), channels_(channels), values_(std::move(values)) {
  require_dims(width, height);
  if (channels != 1 && channels != 3) throw Error("intensity image must have 1 or 3 channels");
  if (values_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error("intensity image payload size mismatch");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error("out-of-range intensity value");
  }
}

double IntensityImage::max_channel_diff(int r0, int c0, int r1, int c1) const {
  double diff = 0.0;
  for (int ch = 0; ch < channels_; ++ch) {
    diff = std::max(diff, std::abs(at(r0, c0, ch) - at(r1, c1, ch)));
  }
  return diff;
}

SparseSignalMap::SparseSignalMap(int width, int height, Representation repr,
                                 std::vector<SparsePoint> points)
    : width_(width), height_(height), repr_(repr), points_(std::move(points)) {
  require_dims(width, height);
  if (repr == Representation::Unitless) {
    throw Error("sparse signal must be depth or disparity");
  }
  lookup_.assign(static_cast<std::size_t>(width) * height, -1);
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const auto& p = points_[k];
    if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width) {
      throw Error("sparse point (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                  ") out of bounds");
    }
    if (!std::isfinite(p.value) || p.value <= 0.0) {
      throw Error("sparse point value must be finite and positive");
    }
    auto& slot = lookup_[static_cast<std::size_t>(p.row) * width + p.col];
    if (slot >= 0) {
      throw Error("duplicate sparse point at (" + std::to_string(p.row) + "," +
                  std::to_string(p.col) + ")");
    }
    slot = static_cast<std::int32_t>(k);
  }
}

std::optional<std::size_t> SparseSignalMap::find(int row, int col) const {
  if (row < 0 || row >= height_ || col < 0 || col >= width_) return std::nullopt;
  const auto slot = lookup_[static_cast<std::size_t>(row) * width_ + col];
  if (slot < 0) return std::nullopt;
  return static_cast<std::size_t>(slot);
}

DenseField::DenseField(int width, int height, Representation repr, std::vector<double> values,
                       std::vector<std::uint8_t> valid)
    : width_(width), height_(height), repr_(repr), values_(std::move(values)),
      valid_(std::move(valid)) {
  require_dims(width, height);
  const auto n = static_cast<std::size_t>(width) * height;
  if (values_.size() != n || valid_.size() != n) throw Error("dense field payload size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid_[i]) continue;
    valid_[i] = 1;
    if (!std::isfinite(values_[i])) throw Error("non-finite value in valid pixel");
    if (repr == Representation::Unitless && (values_[i] < 0.0 || values_[i] > 1.0)) {
      throw Error("out-of-range confidence value");
    }
  }
}

DenseField DenseField::filled(int width, int height, Representation repr, double value) {
  const auto n = static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0);
  return DenseField(width, height, repr, std::vector<double>(n, value),
                    std::vector<std::uint8_t>(n, 1));
}

DenseField DenseField::all_invalid(int width, int height, Representation repr) {
  const auto n = static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0);
  return DenseField(width, height, repr, std::vector<double>(n, 0.0),
                    std::vector<std::uint8_t>(n, 0));
}

DenseField DenseField::from_sparse(const SparseSignalMap& sparse) {
  const auto n = static_cast<std::size_t>(sparse.width()) * sparse.height();
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (const auto& p : sparse.points()) {
    const auto idx = static_cast<std::size_t>(p.row) * sparse.width() + p.col;
    values[idx] = p.value;
    valid[idx] = 1;
  }
  return DenseField(sparse.width(), sparse.height(), sparse.representation(), std::move(values),
                    std::move(valid));
}

std::size_t DenseField::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), 1));
}

DenseField DenseField::with_representation(Representation repr) const {
  return DenseField(width_, height_, repr, values_, valid_);
}

ConfidencePatch ConfidencePatch::empty_around(std::size_t source, int row, int col, double value,
                                              int half_size, int width, int height) {
  ConfidencePatch patch;
  patch.source = source;
  patch.row = row;
  patch.col = col;
  patch.half_size = half_size;
  patch.source_value = value;
  patch.top = std::max(0, row - half_size);
  patch.left = std::max(0, col - half_size);
  patch.rows = std::min(height - 1, row + half_size) - patch.top + 1;
  patch.cols = std::min(width - 1, col + half_size) - patch.left + 1;
  patch.values.assign(static_cast<std::size_t>(patch.rows) * patch.cols, 0.0);
  return patch;
}

CostVolume::CostVolume(int height, int width, int disparities, int features,
                       std::vector<float> data)
    : height_(height), width_(width), disparities_(disparities), features_(features),
      data_(std::move(data)) {
  require_dims(width, height);
  if (disparities < 1 || features < 1) throw Error("cost volume needs D_max >= 1 and F >= 1");
  if (data_.size() != static_cast<std::size_t>(height) * width * disparities * features) {
    throw Error("cost volume payload size mismatch");
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw Error("non-finite cost volume entry");
  }
}

void require_same_dims(const DenseField& a, const DenseField& b, std::string_view what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(std::string(what) + ": dimension mismatch");
  }
}

}  // namespace s3
