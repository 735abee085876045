#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "s3/expansion.hpp"
#include "s3/gdc.hpp"
#include "s3/guidance.hpp"
#include "s3/kv_config.hpp"
#include "s3/metrics.hpp"
#include "s3/synth.hpp"
#include "s3/training.hpp"

namespace s3 {

enum class SamplingMode { Uniform, Beams, Radar };

struct SamplingSpec {
  SamplingMode mode = SamplingMode::Uniform;
  double rate = 0.15;
  int beams = 4;
  double step_deg = 0.4;
  RowBand band{0, 0};  // radar rows; {0, 0} with radar means the middle fifth
  int count = 50;

  /// Keys: sample=uniform|beams|radar rate beams step radar_first radar_last radar_count.
  static SamplingSpec from_config(const KvConfig& cfg);
};

SparseSignalMap draw_samples(const DenseField& truth, const CameraIntrinsics& cam,
                             const SamplingSpec& spec, std::uint64_t seed);

/// `model=adhoc|kernel` with `tau`, `L`, `alpha`, `beta`, `kernel_bias`, `path_accum`.
ExpansionModel expansion_model_from_config(const KvConfig& cfg);
/// `lambda1 lambda2 lambda_sup learning_rate iterations sample_rate seed L`.
TrainingConfig training_config_from_config(const KvConfig& cfg);

/// Everything one seeded experiment needs. Sub-seeds come from `seed` through one Rng.
struct ExperimentSpec {
  std::uint64_t seed = 0;
  SceneSpec scene;
  CorruptionSpec corruption;
  SamplingSpec sampling;
  ExpansionModel model = KernelModel{};
  double expand_rate = 1.0;
  GaussianGuideConfig guide;
  int disparities = 32;
  int features = 4;
  double sharpness = 2.0;
  CostVolumeStyle volume{0.1};
  GraphOptions graph;
  double norm_kappa = 1.0;

  /// Reads scene, corruption, sampling, expansion and guidance keys from one flat config.
  static ExperimentSpec from_config(const KvConfig& cfg);
};

struct RunSeeds {
  std::uint64_t scene, corruption, sampling, expansion, volume;
};
RunSeeds derive_seeds(std::uint64_t seed);

/// Ground truth and simulated prediction of one scene in disparity, with the hints.
struct PreparedScene {
  Scene scene;
  DenseField truth;       // disparity
  DenseField prediction;  // corrupted disparity
  SparseSignalMap hints;  // disparity
  RunSeeds seeds;
};

PreparedScene prepare_scene(const ExperimentSpec& spec);
Expansion expand_hints(const PreparedScene& scene, const ExperimentSpec& spec);

/// Named estimates of one stage, the first being the unguided baseline.
struct StageResult {
  DenseField truth;
  std::vector<std::pair<std::string, DenseField>> estimates;

  const DenseField& get(const std::string& name) const;
};

StageResult run_output_stage(const PreparedScene& scene, const Expansion& exp);
StageResult run_costvolume_stage(const PreparedScene& scene, const Expansion& exp,
                                 const ExperimentSpec& spec);
StageResult run_norm_stage(const PreparedScene& scene, const Expansion& exp,
                           const ExperimentSpec& spec);
/// Works in depth: raw prediction, hints-only correction, confidence-weighted correction.
StageResult run_gdc_stage(const PreparedScene& scene, const Expansion& exp,
                          const ExperimentSpec& spec);

enum class Stage { Output, CostVolume, Gdc, Norm };
Stage parse_stage(const std::string& text);
std::string to_string(Stage stage);

StageResult run_stage(Stage stage, const PreparedScene& scene, const Expansion& exp,
                      const ExperimentSpec& spec);

/// Training set of prepared scenes, one sample per seed, kernel trained on
/// disparity with the prediction attached.
std::vector<TrainingSample> training_set(const ExperimentSpec& base,
                                         const std::vector<std::uint64_t>& seeds);

struct DensityRow {
  double density = 0.0;
  double unguided_avg = 0.0;  // medians over runs
  double guided_avg = 0.0;
  double unguided_bad2 = 0.0;
  double guided_bad2 = 0.0;
  int runs = 0;
};

/// Uniform sampling at each density (sorted descending), `runs` seeds from
/// base.seed upward, guided estimate = last estimate of the chosen stage.
std::vector<DensityRow> sweep_density(const ExperimentSpec& base, Stage stage,
                                      std::vector<double> densities, int runs);
std::string format_density_csv(const std::vector<DensityRow>& rows);

double median(std::vector<double> values);

}  // namespace s3
