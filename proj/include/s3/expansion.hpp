#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "s3/core.hpp"

namespace s3 {

/// Greedy color-threshold expansion.
struct AdhocConfig {
  double tau = 0.05;  // max-channel intensity difference to the center, unit intensity
  int half_size = 2;  // Chebyshev radius L

  void validate() const;
};

/// Logistic confidence kernel
///   C(p) = sigmoid(bias - |p - c|^2 / alpha^2 - d_int(p, c)^2 / beta^2)
/// with the center forced to 1.
struct KernelParams {
  double alpha = 4.0;   // pixels
  double beta = 0.05;   // unit intensity
  double bias = 2.0;
  bool path_accum = false;  // d_int as minimax edge weight over 4-connected paths

  void validate() const;
  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

inline constexpr int kDefaultKernelHalfSize = 16;

KernelParams parse_kernel_params(std::string_view text);
std::string format_kernel_params(const KernelParams& params);
KernelParams load_kernel_params(const std::filesystem::path& path);
void save_kernel_params(const KernelParams& params, const std::filesystem::path& path);

std::vector<ConfidencePatch> adhoc_expand(const IntensityImage& image,
                                          const SparseSignalMap& sparse,
                                          const AdhocConfig& cfg);
ConfidencePatch adhoc_patch(const IntensityImage& image, const SparseSignalMap& sparse,
                            std::size_t source, const AdhocConfig& cfg);

/// Param-independent per-cell distances of a kernel patch, in footprint order.
struct PatchDistances {
  ConfidencePatch footprint;        // values left at zero
  std::vector<double> spatial_sq;   // squared Euclidean pixel distance to the center
  std::vector<double> intensity;    // max-channel or minimax-path intensity distance
  std::size_t center = 0;           // footprint index of the source pixel
};

PatchDistances patch_distances(const IntensityImage& image, const SparseSignalMap& sparse,
                               std::size_t source, int half_size, bool path_accum);

double sigmoid(double x);
double kernel_logit(double spatial_sq, double intensity, const KernelParams& params);

ConfidencePatch kernel_patch(const PatchDistances& dist, const KernelParams& params);
std::vector<ConfidencePatch> kernel_confidence(const IntensityImage& image,
                                               const SparseSignalMap& sparse,
                                               const KernelParams& params, int half_size);

/// Expanded map G_exp and confidence C. C is valid everywhere and 0 where no
/// signal was expanded; G_exp is invalid there.
struct Expansion {
  DenseField expanded;
  DenseField confidence;
};

/// Confidence-weighted mean of source values per pixel, max confidence, and
/// the exact source values at source pixels. Reduces in ascending source order.
Expansion aggregate(std::span<const ConfidencePatch> patches, const SparseSignalMap& sparse);

struct KernelModel {
  KernelParams params;
  int half_size = kDefaultKernelHalfSize;
};
using ExpansionModel = std::variant<AdhocConfig, KernelModel>;

/// Ascending indices of the sources that get a full patch; the rest pass through.
std::vector<std::size_t> choose_sources(std::size_t count, double sample_rate, std::uint64_t seed);

Expansion expand(const IntensityImage& image, const SparseSignalMap& sparse,
                 const ExpansionModel& model, double sample_rate = 1.0, std::uint64_t seed = 0);

}  // namespace s3
