#include "s3/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace s3 {

namespace {

void require_volume_dims(const CostVolume& cv, int width, int height) {
  if (cv.width() != width || cv.height() != height) {
    throw Error("cost volume and guidance dimensions differ");
  }
}

void require_confidence(const DenseField& confidence) {
  if (confidence.representation() != Representation::Unitless) {
    throw Error("representation mismatch: confidence must be unitless");
  }
}

}  // namespace

DenseField fuse_output(const DenseField& expanded, const DenseField& confidence,
                       const DenseField& prediction) {
  require_same_dims(expanded, prediction, "fuse_output");
  require_same_dims(confidence, prediction, "fuse_output");
  require_confidence(confidence);
  if (expanded.representation() != prediction.representation()) {
    throw Error("representation mismatch between expanded map and prediction");
  }
  const auto n = prediction.pixel_count();
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool has_g = expanded.valid(i);
    const bool has_d = prediction.valid(i);
    if (has_g && has_d) {
      const double c = confidence.valid(i) ? confidence.at(i) : 0.0;
      values[i] = expanded.at(i) * c + prediction.at(i) * (1.0 - c);
    } else if (has_d) {
      values[i] = prediction.at(i);
    } else if (has_g) {
      values[i] = expanded.at(i);
    } else {
      continue;
    }
    valid[i] = 1;
  }
  return DenseField(prediction.width(), prediction.height(), prediction.representation(),
                    std::move(values), std::move(valid));
}

DenseField naive_output_guidance(const SparseSignalMap& sparse, const DenseField& prediction) {
  if (sparse.width() != prediction.width() || sparse.height() != prediction.height()) {
    throw Error("naive_output_guidance: dimension mismatch");
  }
  if (sparse.representation() != prediction.representation()) {
    throw Error("representation mismatch between sparse map and prediction");
  }
  std::vector<double> values(prediction.values().begin(), prediction.values().end());
  std::vector<std::uint8_t> valid(prediction.mask().begin(), prediction.mask().end());
  for (const auto& p : sparse.points()) {
    const auto idx = prediction.index(p.row, p.col);
    values[idx] = p.value;
    valid[idx] = 1;
  }
  return DenseField(prediction.width(), prediction.height(), prediction.representation(),
                    std::move(values), std::move(valid));
}

void GaussianGuideConfig::validate() const {
  if (!(height > 0.0) || !std::isfinite(height)) throw Error("Gaussian height h must be > 0");
  if (!(width > 0.0) || !std::isfinite(width)) throw Error("Gaussian width w must be > 0");
  if (!(shift >= 0.0) || !std::isfinite(shift)) throw Error("shift s must be finite and >= 0");
}

double gaussian_peak(double d, double hint, const GaussianGuideConfig& cfg) {
  const double diff = d - hint;
  return cfg.height * std::exp(-(diff * diff) / (2.0 * cfg.width * cfg.width));
}

CostVolume gsm_modulate(const CostVolume& cv, const SparseSignalMap& sparse,
                        const GaussianGuideConfig& cfg) {
  cfg.validate();
  require_volume_dims(cv, sparse.width(), sparse.height());
  if (sparse.representation() != Representation::Disparity) {
    throw Error("cost-volume guidance needs disparity hints");
  }
  std::vector<float> data(cv.data().begin(), cv.data().end());
  for (const auto& p : sparse.points()) {
    if (p.value >= cv.disparities()) {
      throw Error("hint disparity " + std::to_string(p.value) + " >= D_max");
    }
    for (int d = 0; d < cv.disparities(); ++d) {
      const double m = gaussian_peak(d, p.value, cfg);
      for (int f = 0; f < cv.features(); ++f) {
        auto& x = data[cv.index(p.row, p.col, d, f)];
        x = static_cast<float>(static_cast<double>(x) * m);
      }
    }
  }
  return CostVolume(cv.height(), cv.width(), cv.disparities(), cv.features(), std::move(data));
}

CostVolume s3_modulate(const CostVolume& cv, const DenseField& expanded,
                       const DenseField& confidence, const GaussianGuideConfig& cfg) {
  cfg.validate();
  require_same_dims(expanded, confidence, "s3_modulate");
  require_confidence(confidence);
  require_volume_dims(cv, expanded.width(), expanded.height());
  if (expanded.representation() != Representation::Disparity) {
    throw Error("cost-volume guidance needs a disparity expansion");
  }
  std::vector<float> data(cv.data().begin(), cv.data().end());
  for (int i = 0; i < cv.height(); ++i) {
    for (int j = 0; j < cv.width(); ++j) {
      if (!expanded.valid(i, j)) continue;
      const double g = expanded.at(i, j);
      if (g >= cv.disparities()) {
        throw Error("expanded disparity " + std::to_string(g) + " >= D_max");
      }
      const double c = confidence.valid(i, j) ? confidence.at(i, j) : 0.0;
      for (int d = 0; d < cv.disparities(); ++d) {
        const double m = c * gaussian_peak(d, g, cfg) + cfg.shift;
        for (int f = 0; f < cv.features(); ++f) {
          auto& x = data[cv.index(i, j, d, f)];
          x = static_cast<float>(static_cast<double>(x) * m);
        }
      }
    }
  }
  return CostVolume(cv.height(), cv.width(), cv.disparities(), cv.features(), std::move(data));
}

DenseField regress_disparity(const CostVolume& cv) {
  const int dmax = cv.disparities();
  std::vector<double> logits(static_cast<std::size_t>(dmax));
  std::vector<double> values(static_cast<std::size_t>(cv.width()) * cv.height());
  for (int i = 0; i < cv.height(); ++i) {
    for (int j = 0; j < cv.width(); ++j) {
      double peak = -INFINITY;
      for (int d = 0; d < dmax; ++d) {
        double sum = 0.0;
        for (int f = 0; f < cv.features(); ++f) sum += cv.at(i, j, d, f);
        logits[d] = sum / cv.features();
        peak = std::max(peak, logits[d]);
      }
      double z = 0.0;
      double acc = 0.0;
      for (int d = 0; d < dmax; ++d) {
        const double w = std::exp(logits[d] - peak);
        z += w;
        acc += d * w;
      }
      values[static_cast<std::size_t>(i) * cv.width() + j] = acc / z;
    }
  }
  const auto n = values.size();
  return DenseField(cv.width(), cv.height(), Representation::Disparity, std::move(values),
                    std::vector<std::uint8_t>(n, 1));
}

void NormParams::validate() const {
  if (channels < 1 || disparities < 1) throw Error("norm params need channels, D_max >= 1");
  const auto cd = static_cast<std::size_t>(channels) * disparities;
  const auto c = static_cast<std::size_t>(channels);
  const auto d = static_cast<std::size_t>(disparities);
  if (gain.size() != cd || offset.size() != cd || g_scale.size() != c || g_offset.size() != c ||
      h_scale.size() != c || h_offset.size() != c || phi_g.size() != d || psi_g.size() != d ||
      phi_h.size() != d || psi_h.size() != d) {
    throw Error("norm params dimensions are inconsistent");
  }
  for (const auto* vec : {&gain, &offset, &g_scale, &g_offset, &h_scale, &h_offset, &phi_g,
                          &psi_g, &phi_h, &psi_h}) {
    for (double v : *vec) {
      if (!std::isfinite(v)) throw Error("norm params must be finite");
    }
  }
}

NormParams NormParams::quadratic_peak(int channels, int disparities, double kappa) {
  NormParams p;
  p.channels = channels;
  p.disparities = disparities;
  const auto cd = static_cast<std::size_t>(channels) * disparities;
  p.gain.assign(cd, 1.0);
  p.offset.assign(cd, 0.0);
  p.g_scale.assign(channels, 0.0);
  p.g_offset.assign(channels, 0.0);
  p.h_scale.assign(channels, 1.0);
  p.h_offset.assign(channels, 0.0);
  p.phi_g.assign(disparities, 0.0);
  p.psi_g.assign(disparities, 1.0);
  p.phi_h.resize(disparities);
  p.psi_h.resize(disparities);
  for (int d = 0; d < disparities; ++d) {
    p.phi_h[d] = 2.0 * kappa * d;
    p.psi_h[d] = -kappa * d * d;
  }
  return p;
}

NormModulation norm_modulate(const NormParams& params, const DenseField& expanded,
                             const DenseField& confidence, int row, int col, int channel, int d) {
  if (d < 0 || d >= params.disparities) throw Error("disparity plane out of range");
  if (channel < 0 || channel >= params.channels) throw Error("channel out of range");
  const auto cd = static_cast<std::size_t>(channel) * params.disparities + d;
  const NormModulation plain{params.gain[cd], params.offset[cd]};
  if (!expanded.valid(row, col)) return plain;
  const double x = expanded.at(row, col);
  const double c = confidence.valid(row, col) ? confidence.at(row, col) : 0.0;
  const double cond_gain =
      params.phi_g[d] * (params.g_scale[channel] * x + params.g_offset[channel]) +
      params.psi_g[d];
  const double cond_offset =
      params.phi_h[d] * (params.h_scale[channel] * x + params.h_offset[channel]) +
      params.psi_h[d];
  return {c * cond_gain + (1.0 - c) * plain.gain, c * cond_offset + (1.0 - c) * plain.offset};
}

CostVolume apply_norm_modulation(const CostVolume& cv, const NormParams& params,
                                 const DenseField& expanded, const DenseField& confidence) {
  params.validate();
  require_same_dims(expanded, confidence, "apply_norm_modulation");
  require_confidence(confidence);
  require_volume_dims(cv, expanded.width(), expanded.height());
  if (params.channels != cv.features() || params.disparities != cv.disparities()) {
    throw Error("norm params do not match the cost volume");
  }
  std::vector<float> data(cv.data().begin(), cv.data().end());
  for (int i = 0; i < cv.height(); ++i) {
    for (int j = 0; j < cv.width(); ++j) {
      for (int d = 0; d < cv.disparities(); ++d) {
        for (int f = 0; f < cv.features(); ++f) {
          const auto mod = norm_modulate(params, expanded, confidence, i, j, f, d);
          auto& x = data[cv.index(i, j, d, f)];
          x = static_cast<float>(mod.gain * x + mod.offset);
        }
      }
    }
  }
  return CostVolume(cv.height(), cv.width(), cv.disparities(), cv.features(), std::move(data));
}

StackedRaster input_concat(const IntensityImage& image, const DenseField& expanded,
                           const DenseField& confidence) {
  if (image.width() != expanded.width() || image.height() != expanded.height()) {
    throw Error("input_concat: dimension mismatch");
  }
  require_same_dims(expanded, confidence, "input_concat");
  StackedRaster out;
  out.width = image.width();
  out.height = image.height();
  out.channels = image.channels() + 2;
  out.values.reserve(static_cast<std::size_t>(out.width) * out.height * out.channels);
  for (int i = 0; i < out.height; ++i) {
    for (int j = 0; j < out.width; ++j) {
      for (int c = 0; c < image.channels(); ++c) out.values.push_back(image.at(i, j, c));
      const bool g_valid = expanded.valid(i, j);
      out.values.push_back(g_valid ? expanded.at(i, j) : 0.0);
      out.values.push_back(g_valid && confidence.valid(i, j) ? confidence.at(i, j) : 0.0);
    }
  }
  return out;
}

}  // namespace s3
