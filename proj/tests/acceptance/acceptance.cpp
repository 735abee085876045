// Acceptance runner: one PASS/FAIL line per criterion. Argument: scratch directory.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "s3/cli.hpp"
#include "s3/gdc.hpp"
#include "s3/guidance.hpp"
#include "s3/metrics.hpp"
#include "s3/pipeline.hpp"
#include "s3/training.hpp"
#include "support.hpp"

using namespace s3;
namespace fs = std::filesystem;

namespace {

fs::path g_root;

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// Scenes used by the efficacy criteria.
ExperimentSpec efficacy_spec() {
  ExperimentSpec e;
  e.scene.random_boxes = 2;
  e.corruption.bias = 2.0;
  e.corruption.edge_radius = 1;
  e.corruption.noise_sigma = 0.1;
  e.sharpness = 2.0;
  e.volume.noise = 0.1;
  return e;
}

double avg_of(const StageResult& r, const std::string& name) {
  return evaluate(r.get(name), r.truth).avg;
}

Outcome source_fixed_point() {
  const auto t0 = Clock::now();
  auto spec = efficacy_spec();
  std::size_t sources = 0, bad = 0;
  for (int s = 0; s < 100; ++s) {
    spec.seed = 5000 + s;
    const auto scene = prepare_scene(spec);
    const auto exp = expand_hints(scene, spec);
    for (const auto& p : scene.hints.points()) {
      ++sources;
      if (exp.expanded.at(p.row, p.col) != p.value || exp.confidence.at(p.row, p.col) != 1.0) {
        ++bad;
      }
    }
  }
  const double t = seconds_since(t0);
  return {bad == 0 && sources > 0 && t < 10.0,
          fmt("%.0f sources, %.0f mismatches, %.2f s", double(sources), double(bad), t)};
}

Outcome aggregate_oracle() {
  Rng rng(20240);
  double worst = 0.0;
  std::size_t mask_errors = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto inst = test::random_patch_instance(rng);
    const auto out = aggregate(inst.patches, inst.sparse);
    const auto ref = test::brute_force_aggregate(inst.patches, inst.sparse);
    for (std::size_t i = 0; i < ref.valid.size(); ++i) {
      if (out.expanded.valid(i) != (ref.valid[i] != 0)) ++mask_errors;
      if (ref.valid[i]) worst = std::max(worst, std::abs(out.expanded.at(i) - ref.expanded[i]));
      worst = std::max(worst, std::abs(out.confidence.at(i) - ref.confidence[i]));
    }
  }
  return {mask_errors == 0 && worst <= 1e-12,
          fmt("max deviation %.3g, mask errors %.0f", worst, double(mask_errors))};
}

Outcome max_vs_mean() {
  const SparseSignalMap sp(3, 3, Representation::Depth,
                           {{0, 0, 50.0}, {0, 2, 100.0}, {2, 0, 100.0}});
  const double conf[] = {1.0, 0.001, 0.001};
  std::vector<ConfidencePatch> patches;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& p = sp.points()[k];
    auto patch = ConfidencePatch::empty_around(k, p.row, p.col, p.value, 1, 3, 3);
    patch.at(p.row, p.col) = 1.0;
    patch.at(1, 1) = conf[k];
    patches.push_back(patch);
  }
  const double c_max = aggregate(patches, sp).confidence.at(1, 1);
  const double c_mean = test::brute_force_aggregate(patches, sp, true).confidence[4];
  return {c_max == 1.0 && std::abs(c_mean - 0.334) <= 0.001,
          fmt("max C = %.6g, mean C = %.6g", c_max, c_mean)};
}

Outcome gsm_subset() {
  Rng rng(4242);
  int identical = 0;
  for (int t = 0; t < 50; ++t) {
    const int h = 1 + static_cast<int>(rng.index(16)), w = 1 + static_cast<int>(rng.index(16));
    const int dmax = 1 + static_cast<int>(rng.index(32));
    const int f = 1 + static_cast<int>(rng.index(4));
    std::vector<float> data(static_cast<std::size_t>(h) * w * dmax * f);
    for (auto& x : data) x = static_cast<float>(rng.uniform(-2, 2));
    const CostVolume cv(h, w, dmax, f, std::move(data));
    const auto sp = test::random_sparse(rng, w, h, 1 + rng.index(w * h), 0.01, dmax - 0.01,
                                        Representation::Disparity);
    const auto g = DenseField::from_sparse(sp);
    const auto c = DenseField::filled(w, h, Representation::Unitless, 1.0);
    const GaussianGuideConfig cfg{rng.uniform(1, 10), rng.uniform(0.5, 2), 0.0};
    if (s3_modulate(cv, g, c, cfg) == gsm_modulate(cv, sp, cfg)) ++identical;
  }
  return {identical == 50, fmt("%.0f/50 volumes bit-identical", identical)};
}

Outcome output_efficacy() {
  const auto t0 = Clock::now();
  auto spec = efficacy_spec();
  int ordered = 0;
  std::vector<double> raw, naive, s3v;
  for (int s = 0; s < 20; ++s) {
    spec.seed = s;
    const auto scene = prepare_scene(spec);
    const auto r = run_output_stage(scene, expand_hints(scene, spec));
    raw.push_back(avg_of(r, "raw"));
    naive.push_back(avg_of(r, "naive"));
    s3v.push_back(avg_of(r, "s3"));
    if (s3v.back() <= naive.back() && naive.back() <= raw.back()) ++ordered;
  }
  const double t = seconds_since(t0);
  return {ordered == 20 && t < 30.0,
          fmt("%.0f/20 scenes ordered, median s3 %.4f", ordered, median(s3v)) +
              fmt(" naive %.4f raw %.4f", median(naive), median(raw)) + fmt(", %.2f s", t)};
}

Outcome costvolume_efficacy() {
  auto spec = efficacy_spec();
  spec.sampling.mode = SamplingMode::Beams;
  spec.sampling.beams = 4;
  std::vector<double> gsm, s3v;
  for (int s = 0; s < 20; ++s) {
    spec.seed = s;
    const auto scene = prepare_scene(spec);
    const auto r = run_costvolume_stage(scene, expand_hints(scene, spec), spec);
    gsm.push_back(avg_of(r, "gsm"));
    s3v.push_back(avg_of(r, "s3"));
  }
  const double a = median(s3v), b = median(gsm);
  return {a <= b, fmt("median s3 %.4f, gsm %.4f", a, b)};
}

Outcome gdc_correctness() {
  Rng rng(777);
  double dense_gap = 0.0, idem_gap = 0.0;
  std::size_t moved = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 8 + rng.index(53);
    std::vector<Eigen::Vector3d> pts(n);
    for (auto& p : pts) p = {rng.uniform(-5, 5), rng.uniform(-3, 3), rng.uniform(4, 30)};
    const int k = 4 + static_cast<int>(rng.index(std::min<std::size_t>(7, n - 4)));
    const auto graph = build_graph(pts, {k, 1e-3});
    GdcProblem p;
    for (const auto& q : pts) p.depth.push_back(q.z() + rng.uniform(-2, 2));
    p.hints = 1 + rng.index(n / 3);
    for (std::size_t i = 0; i < p.hints; ++i) p.hint_values.push_back(pts[i].z());
    SolverOptions cg;
    cg.unanchored = UnanchoredPolicy::Freeze;
    SolverOptions dense = cg;
    dense.kind = SolverKind::Dense;
    const auto a = correct(p, graph, cg);
    const auto b = correct(p, graph, dense);
    auto again = p;
    again.depth = a.depth;
    const auto c = correct(again, graph, cg);
    for (std::size_t i = 0; i < n; ++i) {
      dense_gap = std::max(dense_gap, std::abs(a.depth[i] - b.depth[i]));
      idem_gap = std::max(idem_gap, std::abs(c.depth[i] - a.depth[i]));
    }
    for (std::size_t i = 0; i < p.hints; ++i) {
      if (a.depth[i] != p.hint_values[i] || b.depth[i] != p.hint_values[i]) ++moved;
    }
  }
  return {dense_gap <= 1e-7 && idem_gap <= 1e-8 && moved == 0,
          fmt("dense gap %.3g, idempotence gap %.3g, moved hints %.0f", dense_gap, idem_gap,
              double(moved))};
}

Outcome gdc_efficacy() {
  const auto t0 = Clock::now();
  auto spec = efficacy_spec();
  spec.sampling.mode = SamplingMode::Beams;
  spec.sampling.beams = 4;
  std::vector<std::uint64_t> train_seeds{1000, 1001, 1002, 1003};
  TrainingConfig tc;
  tc.iterations = 60;
  tc.half_size = 16;
  const auto trained = train_kernel(training_set(spec, train_seeds), tc, KernelParams{});
  spec.model = KernelModel{trained.params, 16};
  std::vector<double> gdc, s3v;
  for (int s = 0; s < 20; ++s) {
    spec.seed = s;
    const auto scene = prepare_scene(spec);
    const auto r = run_gdc_stage(scene, expand_hints(scene, spec), spec);
    gdc.push_back(avg_of(r, "gdc"));
    s3v.push_back(avg_of(r, "s3"));
  }
  const double a = median(s3v), b = median(gdc);
  return {a <= b, fmt("median with confidence %.4f, hints only %.4f", a, b) +
                      fmt(", trained alpha %.4g beta %.4g bias %.4g", trained.params.alpha,
                          trained.params.beta, trained.params.bias) +
                      fmt(", %.1f s", seconds_since(t0))};
}

// Loss with C frozen at `frozen` in the error term.
double detached_loss(const KernelGeometry& geom, const KernelParams& params,
                     const DenseField& frozen, double l1, double l2) {
  const auto fwd = geom.forward(params);
  const auto& g = fwd.fields.expanded;
  const auto& c = fwd.fields.confidence;
  const auto& t = geom.sample().truth;
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.pixel_count(); ++i) {
    if (!t.valid(i) || !(c.at(i) > 0.0) || !g.valid(i)) continue;
    total += l1 * frozen.at(i) * std::abs(t.at(i) - g.at(i)) + l2 * c.at(i);
    ++n;
  }
  return total / static_cast<double>(n);
}

KernelParams perturb(KernelParams p, int which, double h) {
  (which == 0 ? p.alpha : which == 1 ? p.beta : p.bias) += h;
  return p;
}

Outcome loss_gradients() {
  Rng rng(99);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    auto image = test::random_image(rng, 9, 9, 3);
    auto sparse = test::random_sparse(rng, 9, 9, 3 + rng.index(3), 1.0, 20.0);
    auto truth = test::random_field(rng, 9, 9, Representation::Depth, 1.0, 20.0, 0.1);
    const TrainingSample sample{std::move(image), std::move(sparse), std::move(truth),
                                std::nullopt};
    const KernelParams params{rng.uniform(1.0, 4.0), rng.uniform(0.1, 0.6), rng.uniform(-1, 2),
                              false};
    const KernelGeometry geom(sample, 4, false);
    const double l1 = rng.uniform(0.2, 2.0), l2 = rng.uniform(0.0, 0.5);
    const auto fwd = geom.forward(params);
    const auto ev = s3_loss(fwd, sample.truth, l1, l2);
    for (int p = 0; p < 3; ++p) {
      const double fd =
          (detached_loss(geom, perturb(params, p, h), fwd.fields.confidence, l1, l2) -
           detached_loss(geom, perturb(params, p, -h), fwd.fields.confidence, l1, l2)) /
          (2 * h);
      worst = std::max(worst, std::abs(fd - ev.grad[p]));
    }
  }
  return {worst <= 1e-4, fmt("max |analytic - central difference| %.3g", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != cli::kExitOk) std::cerr << e.str();
  return code;
}

Outcome density_sweep() {
  const auto dir = g_root / "sweep";
  const int code = run_cli({"sweep-density", "--densities", "0.15,0.05,0.01,0.0025", "--runs",
                            "20", "--set", "random_boxes=2", "--set", "bias=2", "--set",
                            "edge_radius=1", "--set", "noise=0.1", "--out", dir.string()});
  if (code != cli::kExitOk) return {false, fmt("exit code %.0f", code)};
  std::istringstream in(slurp(dir / "density.csv"));
  std::string line, detail;
  std::getline(in, line);
  int rows = 0, ok = 0;
  while (std::getline(in, line)) {
    double d = 0, u = 0, g = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &d, &u, &g) != 3) break;
    ++rows;
    if (g <= u && std::isfinite(g)) ++ok;
    detail += fmt(" %.4g:%.3f/%.3f", d, g, u);
  }
  return {rows == 4 && ok == 4, "guided/unguided" + detail};
}

Outcome metric_fixtures() {
  auto depth = [](std::vector<double> v) {
    const auto n = v.size();
    return DenseField(static_cast<int>(n), 1, Representation::Depth, std::move(v),
                      std::vector<std::uint8_t>(n, 1));
  };
  int ok = 0;
  {
    const auto gt = depth({5, 10, 20, 40});
    const auto r = evaluate(gt, gt);
    bool good = r.avg == 0 && r.rms == 0 && r.rel == 0;
    for (double b : r.bad) good = good && b == 0;
    for (double d : r.delta) good = good && d == 100;
    ok += good;
  }
  {
    const auto r = evaluate(depth({13, 23, 33, 43}), depth({10, 20, 30, 40}));
    ok += r.avg == 3 && r.rms == 3 && r.bad[0] == 100 && r.bad[1] == 100 && r.bad[2] == 0 &&
          r.bad[3] == 0 && r.bad[4] == 0;
  }
  {
    const auto r = evaluate(depth({12.5, 10}), depth({10, 10}));
    ok += r.delta[0] == 50 && r.delta[1] == 100 && r.delta[2] == 100;
  }
  return {ok == 3, fmt("%.0f/3 fixtures exact", ok)};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto other = b / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      why = e.path().filename().string();
      return false;
    }
    ++n;
  }
  return n > 0;
}

Outcome determinism() {
  const auto root = g_root / "determinism";
  const std::vector<std::string> small{"--set", "width=40", "--set", "height=30", "--set",
                                       "random_boxes=2", "--set", "bias=2"};
  auto with = [&](std::vector<std::string> a, const fs::path& out) {
    a.insert(a.end(), small.begin(), small.end());
    a.insert(a.end(), {"--out", out.string()});
    return a;
  };
  const auto scene = root / "scene";
  const std::vector<std::pair<std::string, std::function<std::vector<std::string>(fs::path)>>>
      commands{
          {"synth", [&](fs::path o) { return with({"synth", "--seed", "7"}, o); }},
          {"expand",
           [&](fs::path o) {
             return std::vector<std::string>{"expand", "--scene", scene.string(), "--sample-rate",
                                             "0.5",    "--seed",  "3",            "--out",
                                             o.string()};
           }},
          {"guide output", [&](fs::path o) { return with({"guide", "--stage", "output"}, o); }},
          {"guide costvolume",
           [&](fs::path o) {
             return with({"guide", "--stage", "costvolume", "--sample", "beams"}, o);
           }},
          {"guide gdc",
           [&](fs::path o) { return with({"guide", "--stage", "gdc", "--sample", "beams"}, o); }},
          {"guide norm", [&](fs::path o) { return with({"guide", "--stage", "norm"}, o); }},
          {"train",
           [&](fs::path o) {
             return std::vector<std::string>{"train", "--data",      (root / "data").string(),
                                             "--L",   "6",           "--iterations",
                                             "5",     "--out",       o.string()};
           }},
          {"sweep-density",
           [&](fs::path o) {
             return with({"sweep-density", "--runs", "2", "--densities", "0.15,0.01"}, o);
           }},
      };
  fs::remove_all(root);
  if (run_cli(with({"synth", "--seed", "1"}, scene)) != cli::kExitOk)
    return {false, "scene synth failed"};
  for (int s = 0; s < 2; ++s) {
    if (run_cli(with({"synth", "--seed", std::to_string(20 + s)},
                     root / "data" / ("s" + std::to_string(s)))) != cli::kExitOk)
      return {false, "dataset synth failed"};
  }
  int ok = 0;
  std::string failed;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const auto a = root / ("run" + std::to_string(i) + "a");
    const auto b = root / ("run" + std::to_string(i) + "b");
    std::string why;
    if (run_cli(commands[i].second(a)) == cli::kExitOk &&
        run_cli(commands[i].second(b)) == cli::kExitOk && same_tree(a, b, why)) {
      ++ok;
    } else {
      failed += " " + commands[i].first + (why.empty() ? "" : "(" + why + ")");
    }
  }
  return {ok == static_cast<int>(commands.size()),
          fmt("%.0f/%.0f subcommand runs bit-identical", ok, double(commands.size())) +
              (failed.empty() ? "" : ", failed:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
  g_root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "s3_acceptance";
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"source pixels are fixed points of expand", source_fixed_point},
      {"aggregate matches the per-pixel oracle", aggregate_oracle},
      {"max aggregation vs mean on the low-confidence fixture", max_vs_mean},
      {"gsm is the full-confidence zero-shift case", gsm_subset},
      {"output guidance ordering per scene", output_efficacy},
      {"cost-volume guidance with 4 beams", costvolume_efficacy},
      {"gdc solver agreement, idempotence, fixed hints", gdc_correctness},
      {"gdc with trained confidence vs hints only", gdc_efficacy},
      {"loss gradients with detached confidence", loss_gradients},
      {"density sweep", density_sweep},
      {"metric fixtures", metric_fixtures},
      {"cli determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu: %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
