#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "s3/core.hpp"

namespace s3 {

enum class RasterFormat {
  Pfm,    // little-endian float map, invalid pixels stored as +inf
  Png16,  // 16-bit gray, value = round(x * 256), 0 = invalid
};

inline constexpr double kPng16Scale = 256.0;

RasterFormat raster_format_for(const std::filesystem::path& path);

// In-memory codecs. Parse errors throw FormatError with the failing byte offset.
std::vector<std::uint8_t> encode_pfm(const DenseField& field);
std::vector<std::uint8_t> encode_pfm(const IntensityImage& image);
DenseField decode_pfm_field(std::span<const std::uint8_t> bytes, Representation repr);
IntensityImage decode_pfm_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png16(const DenseField& field);
DenseField decode_png16(std::span<const std::uint8_t> bytes, Representation repr);

DenseField read_raster(const std::filesystem::path& path, RasterFormat format,
                       Representation repr);
void write_raster(const DenseField& field, const std::filesystem::path& path,
                  RasterFormat format);

IntensityImage read_image(const std::filesystem::path& path);
void write_image(const IntensityImage& image, const std::filesystem::path& path);

/// Text point list: header `# rows=H cols=W repr=depth|disparity`, then `i,j,value` lines.
SparseSignalMap parse_sparse(std::string_view text);
std::string format_sparse(const SparseSignalMap& sparse);
SparseSignalMap read_sparse(const std::filesystem::path& path);
void write_sparse(const SparseSignalMap& sparse, const std::filesystem::path& path);

/// Flat float32 volume behind a 16-byte header of little-endian uint32 H, W, D_max, F.
std::vector<std::uint8_t> encode_cost_volume(const CostVolume& cv);
CostVolume decode_cost_volume(std::span<const std::uint8_t> bytes);
CostVolume read_cost_volume(const std::filesystem::path& path);
void write_cost_volume(const CostVolume& cv, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace s3
