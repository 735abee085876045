#include "s3/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>

#include "s3/kv_config.hpp"
#include "s3/random.hpp"
#include "s3/raster_io.hpp"

namespace s3 {

void AdhocConfig::validate() const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error("adhoc tau must be >= 0");
  if (half_size < 0) throw Error("adhoc half-size L must be >= 0");
}

void KernelParams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("kernel alpha must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("kernel beta must be positive");
  if (!std::isfinite(bias)) throw Error("kernel bias must be finite");
}

KernelParams parse_kernel_params(std::string_view text) {
  const auto cfg = KvConfig::parse(text);
  KernelParams p;
  p.alpha = cfg.get_double("alpha", p.alpha);
  p.beta = cfg.get_double("beta", p.beta);
  p.bias = cfg.get_double("bias", p.bias);
  p.path_accum = cfg.get_bool("path_accum", p.path_accum);
  cfg.reject_unused("kernel params");
  p.validate();
  return p;
}

std::string format_kernel_params(const KernelParams& params) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "alpha=%.17g\nbeta=%.17g\nbias=%.17g\npath_accum=%d\n",
                params.alpha, params.beta, params.bias, params.path_accum ? 1 : 0);
  return buf;
}

KernelParams load_kernel_params(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("kernel params not found: " + path.string());
  return parse_kernel_params(read_text_file(path));
}

void save_kernel_params(const KernelParams& params, const std::filesystem::path& path) {
  write_text_file(path, format_kernel_params(params));
}

namespace {

void require_matching(const IntensityImage& image, const SparseSignalMap& sparse) {
  if (image.width() != sparse.width() || image.height() != sparse.height()) {
    throw Error("image and sparse map dimensions differ");
  }
}

constexpr int kSteps[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

}  // namespace

ConfidencePatch adhoc_patch(const IntensityImage& image, const SparseSignalMap& sparse,
                            std::size_t source, const AdhocConfig& cfg) {
  const auto& src = sparse.points()[source];
  auto patch = ConfidencePatch::empty_around(source, src.row, src.col, src.value, cfg.half_size,
                                             image.width(), image.height());
  std::deque<std::pair<int, int>> frontier{{src.row, src.col}};
  patch.at(src.row, src.col) = 1.0;
  while (!frontier.empty()) {
    const auto [r, c] = frontier.front();
    frontier.pop_front();
    for (const auto& step : kSteps) {
      const int nr = r + step[0];
      const int nc = c + step[1];
      if (!patch.covers(nr, nc) || patch.at(nr, nc) != 0.0) continue;
      if (image.max_channel_diff(nr, nc, src.row, src.col) > cfg.tau) continue;
      patch.at(nr, nc) = 1.0;
      frontier.emplace_back(nr, nc);
    }
  }
  return patch;
}

std::vector<ConfidencePatch> adhoc_expand(const IntensityImage& image,
                                          const SparseSignalMap& sparse,
                                          const AdhocConfig& cfg) {
  cfg.validate();
  require_matching(image, sparse);
  std::vector<ConfidencePatch> patches;
  patches.reserve(sparse.size());
  for (std::size_t k = 0; k < sparse.size(); ++k) {
    patches.push_back(adhoc_patch(image, sparse, k, cfg));
  }
  return patches;
}

PatchDistances patch_distances(const IntensityImage& image, const SparseSignalMap& sparse,
                               std::size_t source, int half_size, bool path_accum) {
  const auto& src = sparse.points()[source];
  PatchDistances out;
  out.footprint = ConfidencePatch::empty_around(source, src.row, src.col, src.value, half_size,
                                                image.width(), image.height());
  const auto& fp = out.footprint;
  const std::size_t cells = fp.values.size();
  out.spatial_sq.resize(cells);
  out.intensity.resize(cells);
  out.center = static_cast<std::size_t>(src.row - fp.top) * fp.cols + (src.col - fp.left);
  for (int r = 0; r < fp.rows; ++r) {
    for (int c = 0; c < fp.cols; ++c) {
      const double dr = fp.top + r - src.row;
      const double dc = fp.left + c - src.col;
      out.spatial_sq[static_cast<std::size_t>(r) * fp.cols + c] = dr * dr + dc * dc;
    }
  }
  if (!path_accum) {
    for (int r = 0; r < fp.rows; ++r) {
      for (int c = 0; c < fp.cols; ++c) {
        out.intensity[static_cast<std::size_t>(r) * fp.cols + c] =
            image.max_channel_diff(fp.top + r, fp.left + c, src.row, src.col);
      }
    }
    return out;
  }
  // Bottleneck (minimax) Dijkstra inside the footprint.
  auto& best = out.intensity;
  std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  best[out.center] = 0.0;
  heap.emplace(0.0, out.center);
  while (!heap.empty()) {
    const auto [cost, idx] = heap.top();
    heap.pop();
    if (cost > best[idx]) continue;
    const int r = static_cast<int>(idx / fp.cols);
    const int c = static_cast<int>(idx % fp.cols);
    for (const auto& step : kSteps) {
      const int nr = r + step[0];
      const int nc = c + step[1];
      if (nr < 0 || nr >= fp.rows || nc < 0 || nc >= fp.cols) continue;
      const double edge =
          image.max_channel_diff(fp.top + r, fp.left + c, fp.top + nr, fp.left + nc);
      const double through = std::max(cost, edge);
      const auto nidx = static_cast<std::size_t>(nr) * fp.cols + nc;
      if (through < best[nidx]) {
        best[nidx] = through;
        heap.emplace(through, nidx);
      }
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double kernel_logit(double spatial_sq, double intensity, const KernelParams& params) {
  return params.bias - spatial_sq / (params.alpha * params.alpha) -
         intensity * intensity / (params.beta * params.beta);
}

ConfidencePatch kernel_patch(const PatchDistances& dist, const KernelParams& params) {
  ConfidencePatch patch = dist.footprint;
  for (std::size_t i = 0; i < patch.values.size(); ++i) {
    patch.values[i] = sigmoid(kernel_logit(dist.spatial_sq[i], dist.intensity[i], params));
  }
  patch.values[dist.center] = 1.0;
  return patch;
}

std::vector<ConfidencePatch> kernel_confidence(const IntensityImage& image,
                                               const SparseSignalMap& sparse,
                                               const KernelParams& params, int half_size) {
  params.validate();
  require_matching(image, sparse);
  if (half_size < 0) throw Error("kernel half-size L must be >= 0");
  std::vector<ConfidencePatch> patches;
  patches.reserve(sparse.size());
  for (std::size_t k = 0; k < sparse.size(); ++k) {
    patches.push_back(
        kernel_patch(patch_distances(image, sparse, k, half_size, params.path_accum), params));
  }
  return patches;
}

Expansion aggregate(std::span<const ConfidencePatch> patches, const SparseSignalMap& sparse) {
  const int width = sparse.width();
  const int height = sparse.height();
  const auto n = static_cast<std::size_t>(width) * height;

  std::vector<const ConfidencePatch*> ordered;
  ordered.reserve(patches.size());
  for (const auto& p : patches) {
    if (p.source >= sparse.size()) {
      throw Error("patch references source " + std::to_string(p.source) +
                  " absent from the sparse map");
    }
    const auto& src = sparse.points()[p.source];
    if (src.row != p.row || src.col != p.col) {
      throw Error("patch references source " + std::to_string(p.source) +
                  " at a pixel absent from the sparse map");
    }
    if (p.top < 0 || p.left < 0 || p.top + p.rows > height || p.left + p.cols > width ||
        p.values.size() != static_cast<std::size_t>(p.rows) * p.cols) {
      throw Error("patch footprint outside the image");
    }
    ordered.push_back(&p);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->source < b->source; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->source == ordered[i - 1]->source) {
      throw Error("duplicate patch for source " + std::to_string(ordered[i]->source));
    }
  }

  std::vector<double> weighted(n, 0.0);
  std::vector<double> weight(n, 0.0);
  std::vector<double> conf(n, 0.0);
  for (const auto* p : ordered) {
    const double g = sparse.points()[p->source].value;
    for (int r = 0; r < p->rows; ++r) {
      for (int c = 0; c < p->cols; ++c) {
        const double ck = p->values[static_cast<std::size_t>(r) * p->cols + c];
        if (!(ck >= 0.0 && ck <= 1.0)) throw Error("patch confidence outside [0,1]");
        if (ck == 0.0) continue;
        const auto idx = static_cast<std::size_t>(p->top + r) * width + (p->left + c);
        weighted[idx] += ck * g;
        weight[idx] += ck;
        conf[idx] = std::max(conf[idx], ck);
      }
    }
  }

  std::vector<double> expanded(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (weight[i] > 0.0) {
      expanded[i] = weighted[i] / weight[i];
      valid[i] = 1;
    }
  }
  for (const auto& src : sparse.points()) {
    const auto idx = static_cast<std::size_t>(src.row) * width + src.col;
    expanded[idx] = src.value;
    valid[idx] = 1;
    conf[idx] = 1.0;
  }
  return {DenseField(width, height, sparse.representation(), std::move(expanded), std::move(valid)),
          DenseField(width, height, Representation::Unitless, std::move(conf),
                     std::vector<std::uint8_t>(n, 1))};
}

std::vector<std::size_t> choose_sources(std::size_t count, double sample_rate,
                                        std::uint64_t seed) {
  if (!(sample_rate > 0.0 && sample_rate <= 1.0)) throw Error("sample rate must be in (0,1]");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (count == 0 || sample_rate == 1.0) return order;
  const auto keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(sample_rate * static_cast<double>(count))), 1, count);
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

Expansion expand(const IntensityImage& image, const SparseSignalMap& sparse,
                 const ExpansionModel& model, double sample_rate, std::uint64_t seed) {
  require_matching(image, sparse);
  const auto chosen = choose_sources(sparse.size(), sample_rate, seed);
  std::vector<std::uint8_t> full(sparse.size(), 0);
  for (auto k : chosen) full[k] = 1;

  if (const auto* cfg = std::get_if<AdhocConfig>(&model)) cfg->validate();
  if (const auto* km = std::get_if<KernelModel>(&model)) {
    km->params.validate();
    if (km->half_size < 0) throw Error("kernel half-size L must be >= 0");
  }

  std::vector<ConfidencePatch> patches;
  patches.reserve(sparse.size());
  for (std::size_t k = 0; k < sparse.size(); ++k) {
    const auto& src = sparse.points()[k];
    if (!full[k]) {
      auto single = ConfidencePatch::empty_around(k, src.row, src.col, src.value, 0,
                                                  image.width(), image.height());
      single.values[0] = 1.0;
      patches.push_back(std::move(single));
    } else if (const auto* cfg = std::get_if<AdhocConfig>(&model)) {
      patches.push_back(adhoc_patch(image, sparse, k, *cfg));
    } else {
      const auto& km = std::get<KernelModel>(model);
      patches.push_back(kernel_patch(
          patch_distances(image, sparse, k, km.half_size, km.params.path_accum), km.params));
    }
  }
  return aggregate(patches, sparse);
}

}  // namespace s3
