#include "s3/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "s3/random.hpp"

namespace s3 {

SamplingSpec SamplingSpec::from_config(const KvConfig& cfg) {
  SamplingSpec s;
  const auto mode = cfg.get_string("sample", "uniform");
  if (mode == "uniform") {
    s.mode = SamplingMode::Uniform;
  } else if (mode == "beams") {
    s.mode = SamplingMode::Beams;
  } else if (mode == "radar") {
    s.mode = SamplingMode::Radar;
  } else {
    throw Error("unknown sampling mode '" + mode + "' (expected uniform|beams|radar)");
  }
  s.rate = cfg.get_double("rate", s.rate);
  s.beams = cfg.get_int("beams", s.beams);
  s.step_deg = cfg.get_double("step", s.step_deg);
  s.band.first = cfg.get_int("radar_first", s.band.first);
  s.band.last = cfg.get_int("radar_last", s.band.last);
  s.count = cfg.get_int("radar_count", s.count);
  return s;
}

SparseSignalMap draw_samples(const DenseField& truth, const CameraIntrinsics& cam,
                             const SamplingSpec& spec, std::uint64_t seed) {
  switch (spec.mode) {
    case SamplingMode::Uniform:
      return sample_uniform(truth, spec.rate, seed);
    case SamplingMode::Beams:
      return sample_beams(truth, cam, spec.beams, spec.step_deg, seed);
    case SamplingMode::Radar: {
      RowBand band = spec.band;
      if (band.first == 0 && band.last == 0) {
        band.first = truth.height() * 2 / 5;
        band.last = std::max(band.first, truth.height() * 3 / 5 - 1);
      }
      return sample_radar(truth, band, spec.count, seed);
    }
  }
  throw Error("unknown sampling mode");
}

ExpansionModel expansion_model_from_config(const KvConfig& cfg) {
  const auto model = cfg.get_string("model", "kernel");
  if (model == "adhoc") {
    AdhocConfig a;
    a.tau = cfg.get_double("tau", a.tau);
    a.half_size = cfg.get_int("L", a.half_size);
    a.validate();
    return a;
  }
  if (model == "kernel") {
    KernelModel k;
    k.params.alpha = cfg.get_double("alpha", k.params.alpha);
    k.params.beta = cfg.get_double("beta", k.params.beta);
    k.params.bias = cfg.get_double("kernel_bias", k.params.bias);
    k.params.path_accum = cfg.get_bool("path_accum", k.params.path_accum);
    k.half_size = cfg.get_int("L", k.half_size);
    k.params.validate();
    if (k.half_size < 0) throw Error("kernel half-size L must be >= 0");
    return k;
  }
  throw Error("unknown expansion model '" + model + "' (expected adhoc|kernel)");
}

TrainingConfig training_config_from_config(const KvConfig& cfg) {
  TrainingConfig t;
  t.lambda1 = cfg.get_double("lambda1", t.lambda1);
  t.lambda2 = cfg.get_double("lambda2", t.lambda2);
  t.lambda_sup = cfg.get_double("lambda_sup", t.lambda_sup);
  t.learning_rate = cfg.get_double("learning_rate", t.learning_rate);
  t.iterations = cfg.get_int("iterations", t.iterations);
  t.sample_rate = cfg.get_double("sample_rate", t.sample_rate);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  t.half_size = cfg.get_int("L", t.half_size);
  t.validate();
  return t;
}

ExperimentSpec ExperimentSpec::from_config(const KvConfig& cfg) {
  ExperimentSpec e;
  e.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  e.scene = SceneSpec::from_config(cfg);
  e.corruption = CorruptionSpec::from_config(cfg);
  e.sampling = SamplingSpec::from_config(cfg);
  e.model = expansion_model_from_config(cfg);
  e.expand_rate = cfg.get_double("sample_rate", e.expand_rate);
  if (!(e.expand_rate > 0.0 && e.expand_rate <= 1.0)) {
    throw Error("sample rate must be in (0,1]");
  }
  e.guide.height = cfg.get_double("h", e.guide.height);
  e.guide.width = cfg.get_double("w", e.guide.width);
  e.guide.shift = cfg.get_double("s", e.guide.shift);
  e.guide.validate();
  e.disparities = cfg.get_int("disparities", e.disparities);
  e.features = cfg.get_int("features", e.features);
  e.sharpness = cfg.get_double("sharpness", e.sharpness);
  e.volume.noise = cfg.get_double("volume_noise", e.volume.noise);
  e.volume.amplitude = cfg.get_double("volume_amplitude", e.volume.amplitude);
  e.volume.floor = cfg.get_double("volume_floor", e.volume.floor);
  e.graph.k = cfg.get_int("k", e.graph.k);
  e.graph.regularization = cfg.get_double("graph_reg", e.graph.regularization);
  e.norm_kappa = cfg.get_double("norm_kappa", e.norm_kappa);
  return e;
}

RunSeeds derive_seeds(std::uint64_t seed) {
  Rng rng(seed);
  RunSeeds s{};
  s.scene = rng.next();
  s.corruption = rng.next();
  s.sampling = rng.next();
  s.expansion = rng.next();
  s.volume = rng.next();
  return s;
}

PreparedScene prepare_scene(const ExperimentSpec& spec) {
  const auto seeds = derive_seeds(spec.seed);
  SceneSpec scene_spec = spec.scene;
  scene_spec.seed = seeds.scene;
  auto scene = generate_scene(scene_spec);
  auto truth = depth_to_disparity(scene.depth, scene.camera);
  CorruptionSpec corruption = spec.corruption;
  corruption.seed = seeds.corruption;
  auto prediction = corrupt(truth, scene.labels, corruption);
  auto hints = draw_samples(truth, scene.camera, spec.sampling, seeds.sampling);
  return PreparedScene{std::move(scene), std::move(truth), std::move(prediction),
                       std::move(hints), seeds};
}

Expansion expand_hints(const PreparedScene& scene, const ExperimentSpec& spec) {
  return expand(scene.scene.image, scene.hints, spec.model, spec.expand_rate,
                scene.seeds.expansion);
}

const DenseField& StageResult::get(const std::string& name) const {
  for (const auto& [n, f] : estimates) {
    if (n == name) return f;
  }
  throw Error("stage has no estimate named '" + name + "'");
}

StageResult run_output_stage(const PreparedScene& scene, const Expansion& exp) {
  StageResult r{scene.truth, {}};
  r.estimates.emplace_back("raw", scene.prediction);
  r.estimates.emplace_back("naive", naive_output_guidance(scene.hints, scene.prediction));
  r.estimates.emplace_back("s3", fuse_output(exp.expanded, exp.confidence, scene.prediction));
  return r;
}

namespace {

CostVolume prediction_volume(const PreparedScene& scene, const ExperimentSpec& spec) {
  // Keep the simulated matching evidence inside the disparity range.
  std::vector<double> values(scene.prediction.values().begin(), scene.prediction.values().end());
  const double top = spec.disparities - 1.0;
  for (auto& v : values) v = std::clamp(v, 0.0, top);
  const DenseField pred(scene.prediction.width(), scene.prediction.height(),
                        Representation::Disparity, std::move(values),
                        std::vector<std::uint8_t>(scene.prediction.mask().begin(),
                                                  scene.prediction.mask().end()));
  return build_cost_volume(pred, spec.disparities, spec.features, spec.sharpness,
                           scene.seeds.volume, spec.volume);
}

}  // namespace

StageResult run_costvolume_stage(const PreparedScene& scene, const Expansion& exp,
                                 const ExperimentSpec& spec) {
  const auto cv = prediction_volume(scene, spec);
  StageResult r{scene.truth, {}};
  r.estimates.emplace_back("raw", regress_disparity(cv));
  r.estimates.emplace_back("gsm", regress_disparity(gsm_modulate(cv, scene.hints, spec.guide)));
  r.estimates.emplace_back(
      "s3", regress_disparity(s3_modulate(cv, exp.expanded, exp.confidence, spec.guide)));
  return r;
}

StageResult run_norm_stage(const PreparedScene& scene, const Expansion& exp,
                           const ExperimentSpec& spec) {
  const auto cv = prediction_volume(scene, spec);
  const auto params = NormParams::quadratic_peak(spec.features, spec.disparities, spec.norm_kappa);
  StageResult r{scene.truth, {}};
  r.estimates.emplace_back("raw", regress_disparity(cv));
  r.estimates.emplace_back(
      "s3", regress_disparity(apply_norm_modulation(cv, params, exp.expanded, exp.confidence)));
  return r;
}

StageResult run_gdc_stage(const PreparedScene& scene, const Expansion& exp,
                          const ExperimentSpec& spec) {
  const auto& cam = scene.scene.camera;
  const auto depth = disparity_to_depth(scene.prediction, cam);
  const auto truth = scene.scene.depth;
  const int w = depth.width();
  const auto n = depth.pixel_count();
  const double fb = cam.focal * cam.baseline;

  std::vector<std::uint8_t> is_hint(n, 0);
  std::vector<std::size_t> order;
  order.reserve(n);
  GdcProblem problem;
  for (const auto& p : scene.hints.points()) {
    const auto idx = depth.index(p.row, p.col);
    is_hint[idx] = 1;
    order.push_back(idx);
    problem.hint_values.push_back(fb / p.value);
  }
  problem.hints = order.size();
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (is_hint[idx] || !exp.expanded.valid(idx) || !(exp.confidence.at(idx) > 0.0)) continue;
    order.push_back(idx);
    problem.expanded_values.push_back(fb / exp.expanded.at(idx));
    problem.expanded_confidence.push_back(exp.confidence.at(idx));
  }
  problem.expanded = order.size() - problem.hints;
  std::vector<std::uint8_t> placed(n, 0);
  for (auto idx : order) placed[idx] = 1;
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (!placed[idx]) order.push_back(idx);
  }

  std::vector<Eigen::Vector3d> points;
  points.reserve(n);
  for (auto idx : order) {
    const double z = depth.at(idx);
    const int i = static_cast<int>(idx / w);
    const int j = static_cast<int>(idx % w);
    problem.depth.push_back(z);
    points.emplace_back((j - cam.cu) * z / cam.focal, (i - cam.cv) * z / cam.focal, z);
  }
  const auto graph = build_graph(points, spec.graph);
  SolverOptions opts;
  opts.unanchored = UnanchoredPolicy::Freeze;

  auto to_field = [&](const std::vector<double>& solved) {
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[order[k]] = solved[k];
    return DenseField(depth.width(), depth.height(), Representation::Depth, std::move(values),
                      std::vector<std::uint8_t>(n, 1));
  };
  StageResult r{truth, {}};
  r.estimates.emplace_back("raw", depth);
  r.estimates.emplace_back("gdc", to_field(correct(problem, graph, opts).depth));
  r.estimates.emplace_back("s3", to_field(correct_with_confidence(problem, graph, opts).depth));
  return r;
}

Stage parse_stage(const std::string& text) {
  if (text == "output") return Stage::Output;
  if (text == "costvolume") return Stage::CostVolume;
  if (text == "gdc") return Stage::Gdc;
  if (text == "norm") return Stage::Norm;
  throw Error("unknown stage '" + text + "' (expected output|costvolume|gdc|norm)");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Output:
      return "output";
    case Stage::CostVolume:
      return "costvolume";
    case Stage::Gdc:
      return "gdc";
    case Stage::Norm:
      return "norm";
  }
  return "?";
}

StageResult run_stage(Stage stage, const PreparedScene& scene, const Expansion& exp,
                      const ExperimentSpec& spec) {
  switch (stage) {
    case Stage::Output:
      return run_output_stage(scene, exp);
    case Stage::CostVolume:
      return run_costvolume_stage(scene, exp, spec);
    case Stage::Gdc:
      return run_gdc_stage(scene, exp, spec);
    case Stage::Norm:
      return run_norm_stage(scene, exp, spec);
  }
  throw Error("unknown stage");
}

std::vector<TrainingSample> training_set(const ExperimentSpec& base,
                                         const std::vector<std::uint64_t>& seeds) {
  std::vector<TrainingSample> out;
  for (auto seed : seeds) {
    ExperimentSpec spec = base;
    spec.seed = seed;
    auto scene = prepare_scene(spec);
    out.push_back(TrainingSample{std::move(scene.scene.image), std::move(scene.hints),
                                 std::move(scene.truth), std::move(scene.prediction)});
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty set");
  std::sort(values.begin(), values.end());
  const auto m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

std::vector<DensityRow> sweep_density(const ExperimentSpec& base, Stage stage,
                                      std::vector<double> densities, int runs) {
  if (densities.empty()) throw Error("density sweep needs at least one density");
  if (runs < 1) throw Error("density sweep needs runs >= 1");
  std::sort(densities.begin(), densities.end(), std::greater<>());
  std::vector<DensityRow> rows;
  for (double density : densities) {
    if (!(density > 0.0 && density <= 1.0)) throw Error("densities must be in (0,1]");
    std::vector<double> ua, ga, ub, gb;
    for (int r = 0; r < runs; ++r) {
      ExperimentSpec spec = base;
      spec.seed = base.seed + static_cast<std::uint64_t>(r);
      spec.sampling.mode = SamplingMode::Uniform;
      spec.sampling.rate = density;
      const auto scene = prepare_scene(spec);
      const auto exp = expand_hints(scene, spec);
      const auto result = run_stage(stage, scene, exp, spec);
      const auto unguided = evaluate(result.estimates.front().second, result.truth);
      const auto guided = evaluate(result.estimates.back().second, result.truth);
      ua.push_back(unguided.avg);
      ga.push_back(guided.avg);
      ub.push_back(unguided.bad[1]);
      gb.push_back(guided.bad[1]);
    }
    rows.push_back({density, median(ua), median(ga), median(ub), median(gb), runs});
  }
  return rows;
}

std::string format_density_csv(const std::vector<DensityRow>& rows) {
  std::string out = "density,unguided_avg,guided_avg,unguided_bad2,guided_bad2,runs\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", r.density, r.unguided_avg,
                  r.guided_avg, r.unguided_bad2, r.guided_bad2, r.runs);
    out += buf;
  }
  return out;
}

}  // namespace s3
