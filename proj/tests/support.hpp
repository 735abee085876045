#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "s3/core.hpp"
#include "s3/expansion.hpp"
#include "s3/random.hpp"

namespace s3::test {

/// Fresh scratch directory under $S3_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("S3_TEST_TMP");
  const std::filesystem::path base =
      env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "s3_tests";
  const auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline IntensityImage uniform_image(int width, int height, int channels, double value) {
  return IntensityImage(width, height, channels,
                        std::vector<double>(static_cast<std::size_t>(width) * height * channels,
                                            value));
}

inline IntensityImage random_image(Rng& rng, int width, int height, int channels) {
  std::vector<double> v(static_cast<std::size_t>(width) * height * channels);
  for (auto& x : v) x = rng.uniform01();
  return IntensityImage(width, height, channels, std::move(v));
}

/// Values uniform in [lo, hi); a fraction of pixels marked invalid.
inline DenseField random_field(Rng& rng, int width, int height, Representation repr, double lo,
                               double hi, double invalid_fraction = 0.0) {
  const auto n = static_cast<std::size_t>(width) * height;
  std::vector<double> v(n, 0.0);
  std::vector<std::uint8_t> ok(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform01() < invalid_fraction) {
      ok[i] = 0;
      continue;
    }
    v[i] = rng.uniform(lo, hi);
  }
  return DenseField(width, height, repr, std::move(v), std::move(ok));
}

/// `count` distinct random pixels with values in [lo, hi).
inline SparseSignalMap random_sparse(Rng& rng, int width, int height, std::size_t count,
                                     double lo, double hi,
                                     Representation repr = Representation::Depth) {
  std::vector<std::size_t> cells(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  rng.shuffle(cells);
  std::vector<SparsePoint> pts;
  for (std::size_t k = 0; k < count && k < cells.size(); ++k) {
    pts.push_back({static_cast<int>(cells[k] / width), static_cast<int>(cells[k] % width),
                   rng.uniform(lo, hi)});
  }
  return SparseSignalMap(width, height, repr, std::move(pts));
}

/// Random aggregation instance: <= 9x9 image, <= `max_patches` distinct sources,
/// each patch with random confidences (some exactly 0) and center 1.
struct PatchInstance {
  SparseSignalMap sparse;
  std::vector<ConfidencePatch> patches;
};

inline PatchInstance random_patch_instance(Rng& rng, int max_side = 9, int max_patches = 5) {
  const int w = 1 + static_cast<int>(rng.index(max_side));
  const int h = 1 + static_cast<int>(rng.index(max_side));
  const auto count = 1 + rng.index(std::min<std::uint64_t>(max_patches, w * h));
  auto sparse = random_sparse(rng, w, h, count, 0.5, 100.0);
  std::vector<ConfidencePatch> patches;
  for (std::size_t k = 0; k < sparse.size(); ++k) {
    const auto& p = sparse.points()[k];
    auto patch = ConfidencePatch::empty_around(k, p.row, p.col, p.value,
                                               static_cast<int>(rng.index(5)), w, h);
    for (auto& v : patch.values) v = rng.uniform01() < 0.2 ? 0.0 : rng.uniform01();
    patch.at(p.row, p.col) = 1.0;
    patches.push_back(std::move(patch));
  }
  return {std::move(sparse), std::move(patches)};
}

/// Per-pixel re-evaluation of the weighted-mean / max aggregation rule.
struct OracleAggregate {
  std::vector<double> expanded;
  std::vector<std::uint8_t> valid;
  std::vector<double> confidence;
};

inline OracleAggregate brute_force_aggregate(const std::vector<ConfidencePatch>& patches,
                                             const SparseSignalMap& sparse, bool mean_conf = false) {
  const int w = sparse.width();
  const int h = sparse.height();
  OracleAggregate out{std::vector<double>(w * h, 0.0), std::vector<std::uint8_t>(w * h, 0),
                      std::vector<double>(w * h, 0.0)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto idx = static_cast<std::size_t>(r) * w + c;
      if (auto k = sparse.find(r, c)) {
        out.expanded[idx] = sparse.points()[*k].value;
        out.valid[idx] = 1;
        out.confidence[idx] = 1.0;
        continue;
      }
      double num = 0.0, den = 0.0, mx = 0.0, sum = 0.0;
      int covering = 0;
      for (std::size_t k = 0; k < sparse.size(); ++k) {
        for (const auto& p : patches) {
          if (p.source != k || !p.covers(r, c)) continue;
          const double ck = p.at(r, c);
          num += ck * sparse.points()[k].value;
          den += ck;
          mx = std::max(mx, ck);
          sum += ck;
          ++covering;
        }
      }
      if (den > 0.0) {
        out.expanded[idx] = num / den;
        out.valid[idx] = 1;
      }
      out.confidence[idx] = mean_conf ? (covering ? sum / covering : 0.0) : mx;
    }
  }
  return out;
}

}  // namespace s3::test
