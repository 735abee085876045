#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "s3/guidance.hpp"
#include "s3/metrics.hpp"
#include "s3/synth.hpp"
#include "support.hpp"

using namespace s3;

namespace {

SceneSpec plain_spec() {
  SceneSpec s;
  s.texture_noise = 0.0;
  return s;
}

double mean_abs_error(const DenseField& a, const DenseField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) s += std::abs(a.at(i) - b.at(i));
  return s / static_cast<double>(a.pixel_count());
}

}  // namespace

TEST_CASE("plane-only scene: depth increases toward the horizon") {
  const auto spec = plain_spec();
  const auto scene = generate_scene(spec);
  CHECK(scene.depth.valid_count() == scene.depth.pixel_count());
  // Ground pixels sit below the horizon; depth grows as rows move up toward it.
  for (int c = 0; c < spec.width; ++c) {
    for (int r = 1; r < spec.height; ++r) {
      const auto a = scene.depth.index(r - 1, c);
      const auto b = scene.depth.index(r, c);
      if (scene.labels[a] == kGroundLabel && scene.labels[b] == kGroundLabel) {
        CHECK(scene.depth.at(a) > scene.depth.at(b));
      }
    }
  }
  std::set<int> labels(scene.labels.begin(), scene.labels.end());
  CHECK(labels == std::set<int>{kGroundLabel, kWallLabel});
}

TEST_CASE("one box in front of a wall gives two depth modes") {
  auto spec = plain_spec();
  spec.ground = false;
  spec.far_depth = 20.0;
  spec.boxes.push_back({10, 12, 15, 20, 5.0, {0.9, 0.1, 0.1}});
  const auto scene = generate_scene(spec);
  std::map<double, int> hist;
  for (std::size_t i = 0; i < scene.depth.pixel_count(); ++i) hist[scene.depth.at(i)]++;
  REQUIRE(hist.size() == 2);
  CHECK(hist[5.0] == 15 * 20);
  CHECK(hist[20.0] == spec.width * spec.height - 15 * 20);
}

TEST_CASE("scene generation is deterministic per seed") {
  SceneSpec spec;
  spec.random_boxes = 3;
  spec.seed = 42;
  const auto a = generate_scene(spec);
  const auto b = generate_scene(spec);
  CHECK(a.depth == b.depth);
  CHECK(std::equal(a.image.values().begin(), a.image.values().end(), b.image.values().begin()));
  CHECK(a.labels == b.labels);
  spec.seed = 43;
  const auto c = generate_scene(spec);
  CHECK_FALSE(std::equal(a.image.values().begin(), a.image.values().end(),
                         c.image.values().begin()));
}

TEST_CASE("scene spec validation and config") {
  SceneSpec bad;
  bad.boxes.push_back({0, 0, 2, 2, 40.0});
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.boxes[0].depth = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  auto cfg = KvConfig::parse("width=20\nheight=10\nbox0=1,2,3,4,6.5\nrandom_boxes=1\n");
  const auto spec = SceneSpec::from_config(cfg);
  CHECK(spec.width == 20);
  CHECK(spec.height == 10);
  REQUIRE(spec.boxes.size() == 1);
  CHECK(spec.boxes[0].cols == 4);
  CHECK(spec.boxes[0].depth == 6.5);
  CHECK(spec.intrinsics().cu == 9.5);
}

TEST_CASE("intensity edges coincide with depth edges") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.random_boxes = 3;
    spec.slope_x = 0.02;
    const auto scene = generate_scene(spec);
    const auto bounds = region_gradient_bounds(scene.depth, scene.labels);
    std::size_t pairs = 0, ok = 0;
    const int w = spec.width, h = spec.height;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int dr[] = {0, 1};
        const int dc[] = {1, 0};
        for (int k = 0; k < 2; ++k) {
          const int r2 = r + dr[k], c2 = c + dc[k];
          if (r2 >= h || c2 >= w) continue;
          if (scene.image.max_channel_diff(r, c, r2, c2) >= spec.texture_noise) continue;
          ++pairs;
          const auto a = scene.depth.index(r, c), b = scene.depth.index(r2, c2);
          const double bound = bounds[scene.labels[a]];
          if (std::abs(scene.depth.at(a) - scene.depth.at(b)) <= bound) ++ok;
        }
      }
    }
    REQUIRE(pairs > 0);
    CHECK(static_cast<double>(ok) >= 0.99 * static_cast<double>(pairs));
  }
}

TEST_CASE("zero corruption is the identity") {
  SceneSpec spec;
  spec.random_boxes = 2;
  const auto scene = generate_scene(spec);
  CHECK(corrupt(scene.depth, scene.labels, {}) == scene.depth);
}

TEST_CASE("region bias on the large plane only") {
  auto spec = plain_spec();
  spec.boxes.push_back({30, 10, 10, 12, 4.0});
  const auto scene = generate_scene(spec);
  CorruptionSpec c;
  c.bias = 2.0;
  c.bias_min_fraction = 0.3;
  const auto d = corrupt(scene.depth, scene.labels, c);
  std::size_t ground = 0;
  for (int l : scene.labels) ground += l == kGroundLabel;
  const double frac = static_cast<double>(ground) / static_cast<double>(scene.labels.size());
  REQUIRE(frac >= 0.3);
  // The wall may or may not pass the area threshold; count biased regions from labels.
  std::map<int, std::size_t> area;
  for (int l : scene.labels) area[l]++;
  double expected = 0.0;
  for (const auto& [label, n] : area) {
    if (static_cast<double>(n) >= 0.3 * static_cast<double>(scene.labels.size())) {
      expected += 2.0 * static_cast<double>(n) / static_cast<double>(scene.labels.size());
    }
  }
  CHECK(mean_abs_error(d, scene.depth) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected >= 2.0 * frac);
}

TEST_CASE("outliers hit about the requested fraction") {
  SceneSpec spec;
  spec.random_boxes = 2;
  const auto scene = generate_scene(spec);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CorruptionSpec c;
    c.outlier_rate = 0.01;
    c.outlier_magnitude = 50.0;
    c.seed = seed;
    const auto d = corrupt(scene.depth, scene.labels, c);
    const auto rep = evaluate(d, scene.depth);
    CHECK(std::abs(rep.bad[4] - 1.0) <= 0.3);
  }
}

TEST_CASE("edge fattening copies foreground values outward") {
  auto spec = plain_spec();
  spec.ground = false;
  spec.boxes.push_back({10, 10, 10, 10, 5.0});
  const auto scene = generate_scene(spec);
  CorruptionSpec c;
  c.edge_radius = 2;
  const auto d = corrupt(scene.depth, scene.labels, c);
  CHECK(d.at(15, 8) == 5.0);
  CHECK(d.at(15, 7) == spec.far_depth);
  CHECK(d.at(15, 12) == 5.0);
  for (std::size_t i = 0; i < d.pixel_count(); ++i) CHECK(d.at(i) > 0.0);
}

TEST_CASE("uniform sampling counts") {
  const auto f = DenseField::filled(100, 100, Representation::Depth, 3.0);
  CHECK(sample_uniform(f, 1.0, 1).size() == 10000);
  const auto a = sample_uniform(f, 0.15, 1);
  const auto b = sample_uniform(f, 0.15, 2);
  CHECK(a.size() == 1500);
  CHECK(b.size() == 1500);
  bool differ = false;
  for (std::size_t k = 0; k < a.size(); ++k) differ |= !(a.points()[k] == b.points()[k]);
  CHECK(differ);
  const auto a2 = sample_uniform(f, 0.15, 1);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.points()[k] == a2.points()[k]);
  Rng rng(3);
  const auto holes = test::random_field(rng, 50, 40, Representation::Depth, 1, 9, 0.3);
  const auto s = sample_uniform(holes, 0.5, 4);
  CHECK(static_cast<long long>(s.size()) ==
        std::llround(0.5 * static_cast<double>(holes.valid_count())));
  for (const auto& p : s.points()) CHECK(holes.valid(p.row, p.col));
}

TEST_CASE("beam sampling") {
  SceneSpec spec;
  spec.random_boxes = 2;
  const auto scene = generate_scene(spec);
  const auto all = sample_beams(scene.depth, scene.camera, 1000, 0.4, 0);
  CHECK(all.size() == scene.depth.valid_count());

  const auto beams = sample_beams(scene.depth, scene.camera, 4, 0.4, 7);
  REQUIRE(beams.size() > 0);
  std::set<int> rows;
  for (const auto& p : beams.points()) rows.insert(p.row);
  // Contiguous row clusters.
  int clusters = 0;
  int prev = -10;
  for (int r : rows) {
    if (r != prev + 1) ++clusters;
    prev = r;
  }
  CHECK(clusters <= 4);
  CHECK(rows.size() < static_cast<std::size_t>(spec.height));

  const auto one = sample_beams(scene.depth, scene.camera, 1, 0.4, 3);
  const auto& cam = scene.camera;
  CHECK(one.size() > 0);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& p : one.points()) {
    const double x = (p.col - cam.cu) / cam.focal, y = (p.row - cam.cv) / cam.focal;
    const double e = std::atan2(-y, std::hypot(x, 1.0)) * 180.0 / M_PI;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  CHECK(hi - lo < 0.4);

  // Subset of the full sample.
  for (const auto& p : beams.points()) CHECK(all.find(p.row, p.col).has_value());
  CHECK_THROWS_AS(sample_beams(scene.depth, scene.camera, 0, 0.4, 0), Error);
}

TEST_CASE("empty beams is an error") {
  // No valid pixel at all.
  const auto f = DenseField::filled(4, 1, Representation::Depth, 3.0);
  const DenseField holes(4, 1, Representation::Depth, {0, 0, 0, 0}, {0, 0, 0, 0});
  const CameraIntrinsics cam{60.0, 1.5, 0.0, 1.0};
  try {
    sample_beams(holes, cam, 1, 0.4, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("empty beams", 0) == 0);
  }
  CHECK(sample_beams(f, cam, 1, 0.4, 0).size() == 4);
}

TEST_CASE("radar sampling") {
  const auto f = DenseField::filled(40, 30, Representation::Depth, 3.0);
  const auto s = sample_radar(f, {12, 17}, 50, 5);
  CHECK(s.size() == 50);
  for (const auto& p : s.points()) CHECK((p.row >= 12 && p.row <= 17));
  const auto one_row = sample_radar(f, {9, 9}, 10, 5);
  for (const auto& p : one_row.points()) CHECK(p.row == 9);
  CHECK_THROWS_AS(sample_radar(f, {9, 9}, 41, 5), Error);
  CHECK_THROWS_AS(sample_radar(f, {20, 40}, 5, 5), Error);
  CHECK_THROWS_AS(sample_radar(f, {9, 9}, 0, 5), Error);
}

TEST_CASE("synthetic cost volumes") {
  Rng rng(6);
  const auto d = test::random_field(rng, 8, 6, Representation::Disparity, 2.0, 28.0);
  std::vector<double> rounded(d.values().begin(), d.values().end());
  for (auto& v : rounded) v = std::round(v);
  const DenseField d_int(8, 6, Representation::Disparity, rounded,
                         std::vector<std::uint8_t>(rounded.size(), 1));
  const auto readout = regress_disparity(build_cost_volume(d_int, 32, 2, 8.0, 1, {0.0, 16.0, 0.0}));
  // Integer disparities read back exactly; others within half a plane at sharpness 2.
  const auto ints = DenseField::filled(3, 3, Representation::Disparity, 11.0);
  CHECK(std::abs(regress_disparity(build_cost_volume(ints, 32, 1, 8.0, 0)).at(0) - 11.0) < 1e-3);
  const auto soft = regress_disparity(build_cost_volume(d, 32, 3, 2.0, 4, {0.1}));
  for (std::size_t i = 0; i < d.pixel_count(); ++i) {
    CHECK(std::abs(soft.at(i) - d.at(i)) < 0.5);
    CHECK(std::abs(readout.at(i) - d_int.at(i)) < 1e-3);
  }
  // Uniform input: identical pixels. Several features: equal without noise.
  const auto cv = build_cost_volume(ints, 16, 3, 2.0, 0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 16; ++k) {
        CHECK(cv.at(i, j, k, 0) == cv.at(0, 0, k, 0));
        CHECK(cv.at(i, j, k, 2) == cv.at(i, j, k, 0));
      }
  const auto noisy = build_cost_volume(ints, 16, 3, 2.0, 9, {0.1});
  CHECK(noisy.at(0, 0, 5, 0) != noisy.at(0, 0, 5, 1));
  CHECK(std::abs(noisy.at(0, 0, 5, 0) - noisy.at(0, 0, 5, 1)) < 1.0);
  CHECK(build_cost_volume(d, 32, 2, 2.0, 3, {0.1}) == build_cost_volume(d, 32, 2, 2.0, 3, {0.1}));
  const auto far = DenseField::filled(1, 1, Representation::Disparity, 40.0);
  CHECK_THROWS_AS(build_cost_volume(far, 32, 1, 2.0, 0), Error);
  CHECK_THROWS_AS(build_cost_volume(d, 32, 1, 0.0, 0), Error);
}
