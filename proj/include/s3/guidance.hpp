#pragma once

#include <vector>

#include "s3/core.hpp"

namespace s3 {

// Output stage.

/// D_out = G_exp * C + D * (1 - C) where G_exp is valid, D elsewhere.
DenseField fuse_output(const DenseField& expanded, const DenseField& confidence,
                       const DenseField& prediction);

/// D with the sparse pixels overwritten by their observed values.
DenseField naive_output_guidance(const SparseSignalMap& sparse, const DenseField& prediction);

// Cost-volume stage.

struct GaussianGuideConfig {
  double height = 10.0;  // h
  double width = 1.0;    // w, disparity units
  double shift = 1.0;    // s, floor of the confidence-weighted multiplier

  void validate() const;
};

/// h * exp(-(d - g)^2 / (2 w^2)). Shared by both modulations so that the
/// full-confidence, zero-shift case reproduces the raw-hint one bit for bit.
double gaussian_peak(double d, double hint, const GaussianGuideConfig& cfg);

/// Multiplies the features of every hint pixel by the Gaussian peak at its disparity.
CostVolume gsm_modulate(const CostVolume& cv, const SparseSignalMap& sparse,
                        const GaussianGuideConfig& cfg);

/// Multiplies the features of every pixel with valid G_exp by C * peak + s.
CostVolume s3_modulate(const CostVolume& cv, const DenseField& expanded,
                       const DenseField& confidence, const GaussianGuideConfig& cfg);

/// Per pixel: sum_d d * softmax_d(mean over features).
DenseField regress_disparity(const CostVolume& cv);

// Normalization-parameter stage.

/// Conditional normalization parameters for a volume with C channels and D_max planes.
///   conditional gain   = phi_g(d) * (g_scale[c] * x + g_offset[c]) + psi_g(d)
///   conditional offset = phi_h(d) * (h_scale[c] * x + h_offset[c]) + psi_h(d)
/// and per-(c,d) unconditional gain/offset used where the hint is invalid.
struct NormParams {
  int channels = 0;
  int disparities = 0;
  std::vector<double> gain;     // channels x disparities
  std::vector<double> offset;   // channels x disparities
  std::vector<double> g_scale, g_offset;  // per channel
  std::vector<double> h_scale, h_offset;  // per channel
  std::vector<double> phi_g, psi_g;       // per disparity
  std::vector<double> phi_h, psi_h;       // per disparity

  void validate() const;

  /// Identity unconditional branch and a conditional offset of
  /// kappa * (2 d x - d^2), i.e. -kappa * (d - x)^2 up to a constant in d.
  static NormParams quadratic_peak(int channels, int disparities, double kappa);
};

struct NormModulation {
  double gain = 1.0;
  double offset = 0.0;
};

NormModulation norm_modulate(const NormParams& params, const DenseField& expanded,
                             const DenseField& confidence, int row, int col, int channel, int d);

/// F' = gain * F + offset with the per-pixel modulated parameters. Feature f
/// uses channel f of the parameters.
CostVolume apply_norm_modulation(const CostVolume& cv, const NormParams& params,
                                 const DenseField& expanded, const DenseField& confidence);

// Input stage.

/// Channel stack [image channels..., G_exp (0 where invalid), C (0 where invalid)].
struct StackedRaster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;  // row-major, channels interleaved

  double at(int row, int col, int channel) const {
    return values[(static_cast<std::size_t>(row) * width + col) * channels + channel];
  }
};

StackedRaster input_concat(const IntensityImage& image, const DenseField& expanded,
                           const DenseField& confidence);

}  // namespace s3
