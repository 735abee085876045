#include <doctest.h>

#include <cmath>

#include "s3/camera.hpp"
#include "s3/core.hpp"
#include "support.hpp"

using namespace s3;

TEST_CASE("intensity image validates its range") {
  CHECK_NOTHROW(IntensityImage(2, 1, 1, {0.0, 1.0}));
  CHECK_THROWS_AS(IntensityImage(2, 1, 1, {0.0, 1.5}), Error);
  CHECK_THROWS_AS(IntensityImage(2, 1, 1, {0.0, NAN}), Error);
  CHECK_THROWS_AS(IntensityImage(2, 1, 2, {0.0, 0.0, 0.0, 0.0}), Error);
  CHECK_THROWS_AS(IntensityImage(0, 1, 1, {}), Error);
  const IntensityImage img(2, 1, 3, {0.1, 0.5, 0.9, 0.2, 0.2, 0.2});
  CHECK(img.max_channel_diff(0, 0, 0, 1) == doctest::Approx(0.7));
}

TEST_CASE("sparse map invariants") {
  CHECK_NOTHROW(SparseSignalMap(3, 3, Representation::Depth, {{0, 0, 1.0}, {2, 2, 4.0}}));
  CHECK_THROWS_AS(SparseSignalMap(3, 3, Representation::Depth, {{3, 0, 1.0}}), Error);
  CHECK_THROWS_AS(SparseSignalMap(3, 3, Representation::Depth, {{0, -1, 1.0}}), Error);
  CHECK_THROWS_AS(SparseSignalMap(3, 3, Representation::Depth, {{1, 1, 1.0}, {1, 1, 2.0}}),
                  Error);
  CHECK_THROWS_AS(SparseSignalMap(3, 3, Representation::Depth, {{1, 1, 0.0}}), Error);
  CHECK_THROWS_AS(SparseSignalMap(3, 3, Representation::Depth, {{1, 1, INFINITY}}), Error);
  CHECK_THROWS_AS(SparseSignalMap(3, 3, Representation::Unitless, {}), Error);
  const SparseSignalMap m(3, 3, Representation::Disparity, {{0, 1, 1.0}, {2, 0, 4.0}});
  CHECK(m.find(2, 0) == std::optional<std::size_t>(1));
  CHECK_FALSE(m.find(1, 1).has_value());
}

TEST_CASE("dense field invariants") {
  CHECK_THROWS_AS(DenseField(2, 1, Representation::Depth, {1.0, NAN}, {1, 1}), Error);
  CHECK_NOTHROW(DenseField(2, 1, Representation::Depth, {1.0, NAN}, {1, 0}));
  CHECK_THROWS_AS(DenseField(2, 1, Representation::Unitless, {0.5, 1.5}, {1, 1}), Error);
  CHECK_THROWS_AS(DenseField(2, 1, Representation::Depth, {1.0}, {1}), Error);
  const SparseSignalMap m(3, 2, Representation::Depth, {{1, 2, 7.0}});
  const auto f = DenseField::from_sparse(m);
  CHECK(f.valid_count() == 1);
  CHECK(f.valid(1, 2));
  CHECK(f.at(1, 2) == 7.0);
}

TEST_CASE("cost volume invariants") {
  CHECK_THROWS_AS(CostVolume(1, 1, 0, 1, {}), Error);
  CHECK_THROWS_AS(CostVolume(1, 1, 2, 1, {1.0f, INFINITY}), Error);
  const CostVolume cv(1, 2, 2, 1, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(cv.at(0, 1, 0) == 3.0f);
}

TEST_CASE("confidence patch clipping at borders") {
  const auto p = ConfidencePatch::empty_around(0, 0, 1, 5.0, 2, 4, 3);
  CHECK(p.top == 0);
  CHECK(p.left == 0);
  CHECK(p.rows == 3);
  CHECK(p.cols == 4);
  CHECK(p.covers(2, 3));
  CHECK_FALSE(p.covers(3, 0));
}

TEST_CASE("disparity to depth examples") {
  const CameraIntrinsics cam{100.0, 0.0, 0.0, 0.5};
  const auto d = DenseField::filled(1, 1, Representation::Disparity, 1.0);
  CHECK(disparity_to_depth(d, cam).at(0, 0) == doctest::Approx(50.0).epsilon(1e-15));
  const auto zero = DenseField::filled(1, 1, Representation::Disparity, 0.0);
  CHECK_THROWS_AS(disparity_to_depth(zero, cam), Error);
  CHECK_THROWS_AS(disparity_to_depth(DenseField::filled(1, 1, Representation::Depth, 2.0), cam),
                  Error);
}

TEST_CASE("disparity-depth round trip is an involution") {
  Rng rng(11);
  const CameraIntrinsics cam{721.5, 600.0, 180.0, 0.54};
  for (int t = 0; t < 20; ++t) {
    const auto d = test::random_field(rng, 9, 7, Representation::Disparity, 0.5, 190.0, 0.2);
    const auto back = depth_to_disparity(disparity_to_depth(d, cam), cam);
    for (std::size_t i = 0; i < d.pixel_count(); ++i) {
      REQUIRE(back.valid(i) == d.valid(i));
      if (d.valid(i)) CHECK(std::abs(back.at(i) - d.at(i)) <= 1e-9 * d.at(i));
    }
  }
}

TEST_CASE("backproject examples") {
  const CameraIntrinsics cam{4.0, 1.0, 1.0, 1.0};
  std::vector<double> z(3 * 8, 1.0);
  z[1 * 8 + 1] = 10.0;      // principal point
  z[1 * 8 + 1 + 4] = 2.0;   // (c_v, c_u + f)
  const DenseField depth(8, 3, Representation::Depth, z, std::vector<std::uint8_t>(24, 1));
  const auto cloud = backproject(depth, cam);
  REQUIRE(cloud.size() == 24);
  const auto& center = cloud.points()[1 * 8 + 1];
  CHECK(center.x == 0.0);
  CHECK(center.y == 0.0);
  CHECK(center.z == 10.0);
  const auto& side = cloud.points()[1 * 8 + 5];
  CHECK(side.x == doctest::Approx(2.0));
  CHECK(side.y == 0.0);
  CHECK(side.z == 2.0);
}

TEST_CASE("project inverts backproject") {
  Rng rng(3);
  const CameraIntrinsics cam{50.0, 7.5, 5.5, 0.3};
  for (int t = 0; t < 10; ++t) {
    const auto depth = test::random_field(rng, 16, 12, Representation::Depth, 0.5, 80.0, 0.3);
    const auto sparse = project(backproject(depth, cam), cam);
    CHECK(sparse.size() == depth.valid_count());
    for (const auto& p : sparse.points()) {
      REQUIRE(depth.valid(p.row, p.col));
      CHECK(std::abs(p.value - depth.at(p.row, p.col)) <= 1e-9 * depth.at(p.row, p.col));
    }
  }
}

TEST_CASE("point cloud invariants") {
  CHECK_THROWS_AS(PointCloud3D(2, 2, {{0, 0, 0.0, 0, 0}}), Error);
  CHECK_THROWS_AS(PointCloud3D(2, 2, {{0, 0, 1.0, 2, 0}}), Error);
  CHECK_THROWS_AS((CameraIntrinsics{0.0, 0, 0, 1}.validate()), Error);
  CHECK_THROWS_AS((CameraIntrinsics{1.0, 0, 0, -1}.validate()), Error);
}
