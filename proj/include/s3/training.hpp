#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "s3/core.hpp"
#include "s3/expansion.hpp"

namespace s3 {

/// Derivatives with respect to (alpha, beta, bias).
using ParamGradient = std::array<double, 3>;

struct LossEvaluation {
  double loss = 0.0;
  ParamGradient grad{0.0, 0.0, 0.0};
  std::size_t support = 0;
};

/// lambda1 * C * |D* - G_exp| + lambda2 * C, averaged over pixels with valid D*
/// and C > 0. Throws "empty loss support" when there are none.
double s3_loss_value(const DenseField& expanded, const DenseField& confidence,
                     const DenseField& truth, double lambda1, double lambda2);

/// Mean |D_out - D*| over valid D*, with D_out = G_exp * C + D * (1 - C).
double supervised_loss_value(const DenseField& expanded, const DenseField& confidence,
                             const DenseField& prediction, const DenseField& truth);

struct TrainingSample {
  IntensityImage image;
  SparseSignalMap sparse;
  DenseField truth;
  std::optional<DenseField> prediction;  // backbone output D, enables the supervised term
};

/// Kernel expansion of one sample together with d(G_exp)/dθ and d(C)/dθ per pixel.
struct KernelForward {
  Expansion fields;
  std::vector<ParamGradient> d_expanded;
  std::vector<ParamGradient> d_confidence;
};

/// Param-independent geometry of a sample, computed once and reused across iterations.
class KernelGeometry {
 public:
  KernelGeometry(const TrainingSample& sample, int half_size, bool path_accum);

  /// Forward pass; sources outside `chosen` (ascending) pass through as single pixels.
  KernelForward forward(const KernelParams& params, std::span<const std::size_t> chosen) const;
  KernelForward forward(const KernelParams& params) const;

  const TrainingSample& sample() const { return sample_; }

 private:
  TrainingSample sample_;
  std::vector<PatchDistances> patches_;
};

/// Expansion loss and its gradient. C in the first term is held constant while
/// differentiating, so only the second term differentiates through C.
LossEvaluation s3_loss(const KernelForward& fwd, const DenseField& truth, double lambda1,
                       double lambda2);
LossEvaluation s3_loss(const TrainingSample& sample, const KernelParams& params, int half_size,
                       double lambda1, double lambda2);

/// Supervised output loss and its full gradient (no detaching).
LossEvaluation supervised_loss(const KernelForward& fwd, const DenseField& prediction,
                               const DenseField& truth);

struct TrainingConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.01;
  double lambda_sup = 1.0;  // weight of the supervised output term, when a prediction exists
  double learning_rate = 0.05;
  int iterations = 100;
  double sample_rate = 1.0;  // fraction of sources expanded per iteration
  std::uint64_t seed = 0;
  int half_size = kDefaultKernelHalfSize;

  void validate() const;
};

struct TrainingResult {
  KernelParams params;        // lowest-loss iterate
  std::vector<double> curve;  // full-objective loss per evaluated iterate
  double initial_loss = 0.0;
  double final_loss = 0.0;    // loss of `params`
};

/// Objective averaged over the dataset at `params` (all sources expanded).
double training_objective(std::span<const KernelGeometry> dataset, const KernelParams& params,
                          const TrainingConfig& cfg);

/// Adam on (log alpha, log beta, bias). Throws NumericalError naming the
/// iteration when the loss goes non-finite.
TrainingResult train_kernel(std::span<const TrainingSample> dataset, const TrainingConfig& cfg,
                            const KernelParams& initial = {});

std::string format_training_curve(const std::vector<double>& curve);

}  // namespace s3
