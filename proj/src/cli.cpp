#include "s3/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "s3/pipeline.hpp"
#include "s3/raster_io.hpp"

namespace s3::cli {

namespace fs = std::filesystem;

namespace {

// Options shared by every subcommand. Layering: config file, then --set, then flags.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config,--spec", c.config, "key=value config file");
  app->add_option("--set", c.sets, "extra key=value override (repeatable)");
  auto* out = app->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
}

void add_key_flag(CLI::App* app, Common& c, const std::string& name, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      name, [&c, key](const std::string& v) { c.flags.emplace_back(key, v); }, help);
}

KvConfig resolve(const Common& c) {
  KvConfig cfg = c.config.empty() ? KvConfig{} : KvConfig::load(c.config);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error("--set expects key=value, got '" + s + "'");
    }
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : c.flags) cfg.set(k, v);
  return cfg;
}

// Copies a kernel parameter file into the config so the resolved config is self-contained.
void apply_params_file(KvConfig& cfg, const std::string& path) {
  if (path.empty()) return;
  const auto p = load_kernel_params(path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", p.alpha);
  cfg.set("alpha", buf);
  std::snprintf(buf, sizeof(buf), "%.17g", p.beta);
  cfg.set("beta", buf);
  std::snprintf(buf, sizeof(buf), "%.17g", p.bias);
  cfg.set("kernel_bias", buf);
  cfg.set("path_accum", p.path_accum ? "1" : "0");
  if (!cfg.contains("model")) cfg.set("model", "kernel");
}

std::uint64_t resolved_seed(KvConfig& cfg) {
  if (!cfg.contains("seed")) cfg.set("seed", "0");
  return static_cast<std::uint64_t>(cfg.get_int("seed", 0));
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory: " + out);
  return dir;
}

void write_config(const fs::path& dir, const KvConfig& cfg) {
  write_text_file(dir / "config.txt", cfg.format());
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') {
      throw Error("config key '" + key + "': bad list entry '" + cell + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error("config key '" + key + "': empty list");
  return out;
}

int cmd_synth(const Common& c, std::ostream& out) {
  auto cfg = resolve(c);
  const auto seed = resolved_seed(cfg);
  const auto spec = ExperimentSpec::from_config(cfg);
  cfg.reject_unused("synth");
  const auto dir = prepare_out(c.out);
  const auto scene = prepare_scene(spec);
  write_image(scene.scene.image, dir / "image.pfm");
  write_raster(scene.scene.depth, dir / "depth.pfm", RasterFormat::Pfm);
  write_raster(scene.truth, dir / "disparity.pfm", RasterFormat::Pfm);
  write_raster(scene.prediction, dir / "prediction.pfm", RasterFormat::Pfm);
  write_sparse(scene.hints, dir / "hints.txt");
  write_config(dir, cfg);
  out << "seed: " << seed << "\n";
  out << "hints: " << scene.hints.size() << "\n";
  return kExitOk;
}

struct ExpandInputs {
  std::string image;
  std::string sparse;
  std::string scene;
  std::string params;
};

int cmd_expand(const Common& c, const ExpandInputs& in, std::ostream& out) {
  auto cfg = resolve(c);
  apply_params_file(cfg, in.params);
  const auto seed = resolved_seed(cfg);
  const auto model = expansion_model_from_config(cfg);
  const double rate = cfg.get_double("sample_rate", 1.0);
  cfg.reject_unused("expand");
  std::string image_path = in.image;
  std::string sparse_path = in.sparse;
  if (!in.scene.empty()) {
    if (image_path.empty()) image_path = (fs::path(in.scene) / "image.pfm").string();
    if (sparse_path.empty()) sparse_path = (fs::path(in.scene) / "hints.txt").string();
  }
  if (image_path.empty() || sparse_path.empty()) {
    throw Error("expand needs --image and --sparse, or --scene");
  }
  const auto image = read_image(image_path);
  const auto sparse = read_sparse(sparse_path);
  const auto dir = prepare_out(c.out);
  const auto start = std::chrono::steady_clock::now();
  const auto exp = expand(image, sparse, model, rate, seed);
  const double ms = elapsed_ms(start);
  write_raster(exp.expanded, dir / "expanded.pfm", RasterFormat::Pfm);
  write_raster(exp.confidence, dir / "confidence.pfm", RasterFormat::Pfm);
  write_config(dir, cfg);
  out << "seed: " << seed << "\n";
  out << "sources: " << sparse.size() << "\n";
  out << "expanded_pixels: " << exp.expanded.valid_count() << "\n";
  out << "expand_ms: " << ms << "\n";
  return kExitOk;
}

struct GuideInputs {
  std::string params;
  std::string expanded;
  std::string confidence;
  std::string prediction;
  std::string truth;
  std::string repr = "disparity";
};

void write_reports(const fs::path& dir, const StageResult& result, std::ostream& out) {
  std::vector<std::pair<std::string, EvalReport>> rows;
  std::string csv = report_csv_header() + "\n";
  for (const auto& [name, field] : result.estimates) {
    const auto rep = evaluate(field, result.truth);
    csv += report_csv_row(name, rep) + "\n";
    rows.emplace_back(name, rep);
  }
  const auto table = format_report_table(rows);
  write_text_file(dir / "report.csv", csv);
  write_text_file(dir / "report.txt", table);
  const auto imp = improvement(result.estimates.front().second, result.estimates.back().second,
                               result.truth);
  std::string icsv = "threshold,percent_improved\n";
  char buf[96];
  for (std::size_t t = 0; t < imp.thresholds.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", imp.thresholds[t], imp.percent[t]);
    icsv += buf;
  }
  write_text_file(dir / "improvement.csv", icsv);
  out << table;
}

int cmd_guide_files(const Common& c, const GuideInputs& in, KvConfig& cfg, std::ostream& out) {
  const auto stage = parse_stage(cfg.get_string("stage", "output"));
  if (stage != Stage::Output) {
    throw Error("file inputs are only supported for --stage output");
  }
  cfg.reject_unused("guide");
  if (in.expanded.empty() || in.confidence.empty()) {
    throw Error("file mode needs --expanded, --confidence and --prediction");
  }
  const auto repr = parse_representation(in.repr);
  const auto expanded = read_raster(in.expanded, raster_format_for(in.expanded), repr);
  const auto confidence =
      read_raster(in.confidence, raster_format_for(in.confidence), Representation::Unitless);
  const auto prediction = read_raster(in.prediction, raster_format_for(in.prediction), repr);
  const auto dir = prepare_out(c.out);
  const auto fused = fuse_output(expanded, confidence, prediction);
  write_raster(fused, dir / "guided.pfm", RasterFormat::Pfm);
  if (!in.truth.empty()) {
    const auto truth = read_raster(in.truth, raster_format_for(in.truth), repr);
    write_reports(dir, StageResult{truth, {{"raw", prediction}, {"s3", fused}}}, out);
  }
  write_config(dir, cfg);
  return kExitOk;
}

int cmd_guide(const Common& c, const GuideInputs& in, std::ostream& out) {
  auto cfg = resolve(c);
  apply_params_file(cfg, in.params);
  const auto seed = resolved_seed(cfg);
  out << "seed: " << seed << "\n";
  if (!in.prediction.empty()) return cmd_guide_files(c, in, cfg, out);
  const auto stage = parse_stage(cfg.get_string("stage", "output"));
  const auto spec = ExperimentSpec::from_config(cfg);
  cfg.reject_unused("guide");
  const auto dir = prepare_out(c.out);
  const auto scene = prepare_scene(spec);
  const auto exp = expand_hints(scene, spec);
  const auto result = run_stage(stage, scene, exp, spec);
  for (const auto& [name, field] : result.estimates) {
    write_raster(field, dir / ("estimate_" + name + ".pfm"), RasterFormat::Pfm);
  }
  write_raster(result.estimates.back().second, dir / "guided.pfm", RasterFormat::Pfm);
  write_raster(result.truth, dir / "truth.pfm", RasterFormat::Pfm);
  write_reports(dir, result, out);
  write_config(dir, cfg);
  return kExitOk;
}

std::vector<TrainingSample> load_dataset(const std::string& data) {
  const fs::path root(data);
  if (!fs::is_directory(root)) throw Error("dataset directory not found: " + data);
  std::vector<fs::path> scenes;
  if (fs::exists(root / "hints.txt")) {
    scenes.push_back(root);
  } else {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / "hints.txt")) {
        scenes.push_back(entry.path());
      }
    }
  }
  std::sort(scenes.begin(), scenes.end());
  if (scenes.empty()) throw Error("empty dataset: no scene directories in " + data);
  std::vector<TrainingSample> samples;
  for (const auto& dir : scenes) {
    auto sparse = read_sparse(dir / "hints.txt");
    const auto repr = sparse.representation();
    const auto truth_name = repr == Representation::Depth ? "depth.pfm" : "disparity.pfm";
    auto truth = read_raster(dir / truth_name, RasterFormat::Pfm, repr);
    std::optional<DenseField> prediction;
    if (fs::exists(dir / "prediction.pfm")) {
      prediction = read_raster(dir / "prediction.pfm", RasterFormat::Pfm, repr);
    }
    samples.push_back(TrainingSample{read_image(dir / "image.pfm"), std::move(sparse),
                                     std::move(truth), std::move(prediction)});
  }
  return samples;
}

int cmd_train(const Common& c, const std::string& data, const std::string& params,
              std::ostream& out) {
  auto cfg = resolve(c);
  apply_params_file(cfg, params);
  const auto seed = resolved_seed(cfg);
  const auto tc = training_config_from_config(cfg);
  KernelParams initial;
  initial.alpha = cfg.get_double("alpha", initial.alpha);
  initial.beta = cfg.get_double("beta", initial.beta);
  initial.bias = cfg.get_double("kernel_bias", initial.bias);
  initial.path_accum = cfg.get_bool("path_accum", initial.path_accum);
  cfg.get_string("model", "kernel");
  cfg.reject_unused("train");
  const auto dataset = load_dataset(data);
  const auto dir = prepare_out(c.out);
  const auto result = train_kernel(dataset, tc, initial);
  save_kernel_params(result.params, dir / "params.txt");
  write_text_file(dir / "curve.csv", format_training_curve(result.curve));
  write_config(dir, cfg);
  out << "seed: " << seed << "\n";
  out << "samples: " << dataset.size() << "\n";
  out << "initial_loss: " << result.initial_loss << "\n";
  out << "final_loss: " << result.final_loss << "\n";
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& params, std::ostream& out) {
  auto cfg = resolve(c);
  apply_params_file(cfg, params);
  const auto seed = resolved_seed(cfg);
  const auto stage = parse_stage(cfg.get_string("stage", "output"));
  const auto densities =
      parse_list("densities", cfg.get_string("densities", "0.15,0.05,0.01,0.0025"));
  const int runs = cfg.get_int("runs", 20);
  const auto spec = ExperimentSpec::from_config(cfg);
  cfg.reject_unused("sweep-density");
  const auto dir = prepare_out(c.out);
  const auto rows = sweep_density(spec, stage, densities, runs);
  const auto csv = format_density_csv(rows);
  write_text_file(dir / "density.csv", csv);
  write_config(dir, cfg);
  out << "seed: " << seed << "\n" << csv;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse signal expansion and depth guidance on synthetic scenes", "s3cli"};
  app.require_subcommand(1);

  Common synth_c, expand_c, guide_c, train_c, sweep_c;

  auto* synth = app.add_subcommand("synth", "generate a scene, its corrupted prediction and hints");
  add_common(synth, synth_c, true);
  add_key_flag(synth, synth_c, "--seed", "seed", "run seed");
  add_key_flag(synth, synth_c, "--sample", "sample", "uniform|beams|radar");
  add_key_flag(synth, synth_c, "--rate", "rate", "uniform sampling rate");
  add_key_flag(synth, synth_c, "--beams", "beams", "beam count");
  add_key_flag(synth, synth_c, "--step", "step", "elevation step in degrees");
  add_key_flag(synth, synth_c, "--count", "radar_count", "radar point count");

  ExpandInputs expand_in;
  auto* expand_cmd = app.add_subcommand("expand", "expand sparse hints into G_exp and C");
  add_common(expand_cmd, expand_c, true);
  expand_cmd->add_option("--image", expand_in.image, "intensity image (PFM)");
  expand_cmd->add_option("--sparse", expand_in.sparse, "sparse point file");
  expand_cmd->add_option("--scene", expand_in.scene, "scene directory written by synth");
  expand_cmd->add_option("--params", expand_in.params, "kernel parameter file");
  add_key_flag(expand_cmd, expand_c, "--seed", "seed", "subsampling seed");
  add_key_flag(expand_cmd, expand_c, "--model", "model", "adhoc|kernel");
  add_key_flag(expand_cmd, expand_c, "--L", "L", "patch half-size");
  add_key_flag(expand_cmd, expand_c, "--tau", "tau", "adhoc intensity threshold");
  add_key_flag(expand_cmd, expand_c, "--sample-rate", "sample_rate", "fraction of sources expanded");

  GuideInputs guide_in;
  auto* guide = app.add_subcommand("guide", "run one guidance stage and report metrics");
  add_common(guide, guide_c, true);
  guide->add_option("--params", guide_in.params, "kernel parameter file");
  guide->add_option("--expanded", guide_in.expanded, "G_exp raster (file mode)");
  guide->add_option("--confidence", guide_in.confidence, "C raster (file mode)");
  guide->add_option("--prediction", guide_in.prediction, "prediction raster (file mode)");
  guide->add_option("--truth", guide_in.truth, "ground truth raster (file mode)");
  guide->add_option("--repr", guide_in.repr, "depth|disparity (file mode)");
  add_key_flag(guide, guide_c, "--seed", "seed", "run seed");
  add_key_flag(guide, guide_c, "--stage", "stage", "output|costvolume|gdc|norm");
  add_key_flag(guide, guide_c, "--k", "k", "graph neighbors");
  add_key_flag(guide, guide_c, "--model", "model", "adhoc|kernel");
  add_key_flag(guide, guide_c, "--sample", "sample", "uniform|beams|radar");
  add_key_flag(guide, guide_c, "--sample-rate", "sample_rate", "fraction of sources expanded");

  std::string train_data, train_params;
  auto* train = app.add_subcommand("train", "fit kernel parameters on scene directories");
  add_common(train, train_c, true);
  train->add_option("--data", train_data, "directory of synth scene directories")->required();
  train->add_option("--params", train_params, "initial kernel parameter file");
  add_key_flag(train, train_c, "--seed", "seed", "subsampling seed");
  add_key_flag(train, train_c, "--iterations", "iterations", "optimizer steps");
  add_key_flag(train, train_c, "--lr", "learning_rate", "learning rate");
  add_key_flag(train, train_c, "--lambda1", "lambda1", "weight of the error term");
  add_key_flag(train, train_c, "--lambda2", "lambda2", "weight of the confidence term");
  add_key_flag(train, train_c, "--L", "L", "patch half-size");
  add_key_flag(train, train_c, "--sample-rate", "sample_rate", "fraction of sources per step");

  std::string sweep_params;
  auto* sweep = app.add_subcommand("sweep-density", "guided vs unguided error across densities");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--params", sweep_params, "kernel parameter file");
  add_key_flag(sweep, sweep_c, "--seed", "seed", "first run seed");
  add_key_flag(sweep, sweep_c, "--densities", "densities", "comma-separated sampling rates");
  add_key_flag(sweep, sweep_c, "--runs", "runs", "seeds per density");
  add_key_flag(sweep, sweep_c, "--stage", "stage", "output|costvolume|gdc|norm");

  std::vector<const char*> argv{"s3cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_c, out);
    if (expand_cmd->parsed()) return cmd_expand(expand_c, expand_in, out);
    if (guide->parsed()) return cmd_guide(guide_c, guide_in, out);
    if (train->parsed()) return cmd_train(train_c, train_data, train_params, out);
    if (sweep->parsed()) return cmd_sweep(sweep_c, sweep_params, out);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  err << "error: no subcommand\n";
  return kExitConfig;
}

}  // namespace s3::cli
