#include "s3/training.hpp"

#include <algorithm>
#include <cmath>

namespace s3 {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void add_scaled(ParamGradient& acc, const ParamGradient& g, double s) {
  for (int i = 0; i < 3; ++i) acc[i] += s * g[i];
}

}  // namespace

double s3_loss_value(const DenseField& expanded, const DenseField& confidence,
                     const DenseField& truth, double lambda1, double lambda2) {
  require_same_dims(expanded, truth, "s3 loss");
  require_same_dims(confidence, truth, "s3 loss");
  double total = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < truth.pixel_count(); ++i) {
    const double c = confidence.valid(i) ? confidence.at(i) : 0.0;
    if (!truth.valid(i) || !(c > 0.0) || !expanded.valid(i)) continue;
    total += lambda1 * c * std::abs(truth.at(i) - expanded.at(i)) + lambda2 * c;
    ++support;
  }
  if (support == 0) throw Error("empty loss support");
  return total / static_cast<double>(support);
}

double supervised_loss_value(const DenseField& expanded, const DenseField& confidence,
                             const DenseField& prediction, const DenseField& truth) {
  require_same_dims(expanded, truth, "supervised loss");
  require_same_dims(prediction, truth, "supervised loss");
  double total = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < truth.pixel_count(); ++i) {
    if (!truth.valid(i) || !prediction.valid(i)) continue;
    double out = prediction.at(i);
    if (expanded.valid(i)) {
      const double c = confidence.at(i);
      out = expanded.at(i) * c + prediction.at(i) * (1.0 - c);
    }
    total += std::abs(out - truth.at(i));
    ++support;
  }
  if (support == 0) throw Error("empty loss support");
  return total / static_cast<double>(support);
}

KernelGeometry::KernelGeometry(const TrainingSample& sample, int half_size, bool path_accum)
    : sample_(sample) {
  const auto& s = sample_;
  if (s.image.width() != s.sparse.width() || s.image.height() != s.sparse.height() ||
      s.truth.width() != s.sparse.width() || s.truth.height() != s.sparse.height()) {
    throw Error("training sample dimensions differ");
  }
  if (s.prediction) require_same_dims(*s.prediction, s.truth, "training sample");
  if (half_size < 0) throw Error("kernel half-size L must be >= 0");
  patches_.reserve(s.sparse.size());
  for (std::size_t k = 0; k < s.sparse.size(); ++k) {
    patches_.push_back(patch_distances(s.image, s.sparse, k, half_size, path_accum));
  }
}

KernelForward KernelGeometry::forward(const KernelParams& params) const {
  std::vector<std::size_t> all(patches_.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return forward(params, all);
}

KernelForward KernelGeometry::forward(const KernelParams& params,
                                      std::span<const std::size_t> chosen) const {
  params.validate();
  const auto& sparse = sample_.sparse;
  const int width = sparse.width();
  const int height = sparse.height();
  const auto n = static_cast<std::size_t>(width) * height;

  std::vector<double> weighted(n, 0.0);
  std::vector<double> weight(n, 0.0);
  std::vector<double> conf(n, 0.0);
  std::vector<ParamGradient> d_weighted(n, ParamGradient{});
  std::vector<ParamGradient> d_weight(n, ParamGradient{});
  std::vector<ParamGradient> d_conf(n, ParamGradient{});

  const double a2 = params.alpha * params.alpha;
  const double b2 = params.beta * params.beta;
  for (std::size_t k : chosen) {
    const auto& dist = patches_.at(k);
    const auto& fp = dist.footprint;
    const double g = sparse.points()[k].value;
    for (std::size_t cell = 0; cell < fp.values.size(); ++cell) {
      if (cell == dist.center) continue;  // source pixels are overwritten below
      const double ds2 = dist.spatial_sq[cell];
      const double di = dist.intensity[cell];
      const double c = sigmoid(params.bias - ds2 / a2 - di * di / b2);
      if (c == 0.0) continue;
      const double dz = c * (1.0 - c);
      const ParamGradient dc{dz * 2.0 * ds2 / (a2 * params.alpha),
                             dz * 2.0 * di * di / (b2 * params.beta), dz};
      const int r = fp.top + static_cast<int>(cell / fp.cols);
      const int col = fp.left + static_cast<int>(cell % fp.cols);
      const auto idx = static_cast<std::size_t>(r) * width + col;
      weighted[idx] += c * g;
      weight[idx] += c;
      add_scaled(d_weighted[idx], dc, g);
      add_scaled(d_weight[idx], dc, 1.0);
      if (c > conf[idx]) {
        conf[idx] = c;
        d_conf[idx] = dc;
      }
    }
  }

  KernelForward out{Expansion{DenseField::all_invalid(width, height, sparse.representation()),
                              DenseField::all_invalid(width, height, Representation::Unitless)},
                    std::vector<ParamGradient>(n, ParamGradient{}), std::move(d_conf)};
  std::vector<double> expanded(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weight[i] > 0.0)) continue;
    expanded[i] = weighted[i] / weight[i];
    valid[i] = 1;
    for (int p = 0; p < 3; ++p) {
      out.d_expanded[i][p] = (d_weighted[i][p] - expanded[i] * d_weight[i][p]) / weight[i];
    }
  }
  for (const auto& src : sparse.points()) {
    const auto idx = static_cast<std::size_t>(src.row) * width + src.col;
    expanded[idx] = src.value;
    valid[idx] = 1;
    conf[idx] = 1.0;
    out.d_expanded[idx] = {};
    out.d_confidence[idx] = {};
  }
  out.fields.expanded = DenseField(width, height, sparse.representation(), std::move(expanded),
                                   std::move(valid));
  out.fields.confidence = DenseField(width, height, Representation::Unitless, std::move(conf),
                                     std::vector<std::uint8_t>(n, 1));
  return out;
}

LossEvaluation s3_loss(const KernelForward& fwd, const DenseField& truth, double lambda1,
                       double lambda2) {
  const auto& g = fwd.fields.expanded;
  const auto& c = fwd.fields.confidence;
  require_same_dims(g, truth, "s3 loss");
  LossEvaluation ev;
  for (std::size_t i = 0; i < truth.pixel_count(); ++i) {
    const double ci = c.at(i);
    if (!truth.valid(i) || !(ci > 0.0) || !g.valid(i)) continue;
    const double diff = g.at(i) - truth.at(i);
    ev.loss += lambda1 * ci * std::abs(diff) + lambda2 * ci;
    // Term one: C is a constant; only G_exp carries the gradient.
    add_scaled(ev.grad, fwd.d_expanded[i], lambda1 * ci * sign(diff));
    add_scaled(ev.grad, fwd.d_confidence[i], lambda2);
    ++ev.support;
  }
  if (ev.support == 0) throw Error("empty loss support");
  const double inv = 1.0 / static_cast<double>(ev.support);
  ev.loss *= inv;
  for (auto& v : ev.grad) v *= inv;
  return ev;
}

LossEvaluation s3_loss(const TrainingSample& sample, const KernelParams& params, int half_size,
                       double lambda1, double lambda2) {
  const KernelGeometry geom(sample, half_size, params.path_accum);
  return s3_loss(geom.forward(params), sample.truth, lambda1, lambda2);
}

LossEvaluation supervised_loss(const KernelForward& fwd, const DenseField& prediction,
                               const DenseField& truth) {
  const auto& g = fwd.fields.expanded;
  const auto& c = fwd.fields.confidence;
  require_same_dims(g, truth, "supervised loss");
  require_same_dims(prediction, truth, "supervised loss");
  LossEvaluation ev;
  for (std::size_t i = 0; i < truth.pixel_count(); ++i) {
    if (!truth.valid(i) || !prediction.valid(i)) continue;
    ++ev.support;
    const double d = prediction.at(i);
    if (!g.valid(i)) {
      ev.loss += std::abs(d - truth.at(i));
      continue;
    }
    const double ci = c.at(i);
    const double out = g.at(i) * ci + d * (1.0 - ci);
    const double s = sign(out - truth.at(i));
    ev.loss += std::abs(out - truth.at(i));
    add_scaled(ev.grad, fwd.d_expanded[i], s * ci);
    add_scaled(ev.grad, fwd.d_confidence[i], s * (g.at(i) - d));
  }
  if (ev.support == 0) throw Error("empty loss support");
  const double inv = 1.0 / static_cast<double>(ev.support);
  ev.loss *= inv;
  for (auto& v : ev.grad) v *= inv;
  return ev;
}

void TrainingConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda_sup >= 0.0)) {
    throw Error("loss weights must be >= 0");
  }
  if (!(sample_rate > 0.0 && sample_rate <= 1.0)) throw Error("sample rate must be in (0,1]");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error("learning rate must be positive");
  }
  if (iterations < 0) throw Error("iteration count must be >= 0");
  if (half_size < 0) throw Error("kernel half-size L must be >= 0");
}

namespace {

// Objective and gradient summed over samples, divided by the sample count.
LossEvaluation evaluate(std::span<const KernelGeometry> dataset, const KernelParams& params,
                        const TrainingConfig& cfg, std::uint64_t round, bool subsample) {
  LossEvaluation total;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const auto& geom = dataset[s];
    const auto fwd = subsample && cfg.sample_rate < 1.0
                         ? geom.forward(params, choose_sources(geom.sample().sparse.size(),
                                                               cfg.sample_rate,
                                                               cfg.seed + 7919 * round + s))
                         : geom.forward(params);
    const auto term = s3_loss(fwd, geom.sample().truth, cfg.lambda1, cfg.lambda2);
    total.loss += term.loss;
    add_scaled(total.grad, term.grad, 1.0);
    if (geom.sample().prediction && cfg.lambda_sup > 0.0) {
      const auto sup = supervised_loss(fwd, *geom.sample().prediction, geom.sample().truth);
      total.loss += cfg.lambda_sup * sup.loss;
      add_scaled(total.grad, sup.grad, cfg.lambda_sup);
    }
  }
  const double inv = 1.0 / static_cast<double>(dataset.size());
  total.loss *= inv;
  for (auto& v : total.grad) v *= inv;
  return total;
}

}  // namespace

double training_objective(std::span<const KernelGeometry> dataset, const KernelParams& params,
                          const TrainingConfig& cfg) {
  if (dataset.empty()) throw Error("empty training dataset");
  return evaluate(dataset, params, cfg, 0, false).loss;
}

TrainingResult train_kernel(std::span<const TrainingSample> dataset, const TrainingConfig& cfg,
                            const KernelParams& initial) {
  cfg.validate();
  initial.validate();
  if (dataset.empty()) throw Error("empty training dataset");
  std::vector<KernelGeometry> geoms;
  geoms.reserve(dataset.size());
  for (const auto& s : dataset) geoms.emplace_back(s, cfg.half_size, initial.path_accum);

  // Adam over u = (log alpha, log beta, bias).
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-12;
  std::array<double, 3> u{std::log(initial.alpha), std::log(initial.beta), initial.bias};
  std::array<double, 3> m{};
  std::array<double, 3> v{};

  auto params_of = [&](const std::array<double, 3>& x) {
    KernelParams p = initial;
    p.alpha = std::exp(x[0]);
    p.beta = std::exp(x[1]);
    p.bias = x[2];
    return p;
  };

  TrainingResult result;
  result.params = initial;
  double best = 0.0;
  for (int it = 0; it <= cfg.iterations; ++it) {
    const auto params = params_of(u);
    const auto full = evaluate(geoms, params, cfg, 0, false);
    if (!std::isfinite(full.loss)) {
      throw NumericalError("training diverged at iteration " + std::to_string(it));
    }
    result.curve.push_back(full.loss);
    if (it == 0 || full.loss < best) {
      best = full.loss;
      result.params = params;
    }
    if (it == cfg.iterations) break;

    const auto step = cfg.sample_rate < 1.0
                          ? evaluate(geoms, params, cfg, static_cast<std::uint64_t>(it) + 1, true)
                          : full;
    const std::array<double, 3> gu{step.grad[0] * params.alpha, step.grad[1] * params.beta,
                                   step.grad[2]};
    for (int p = 0; p < 3; ++p) {
      if (!std::isfinite(gu[p])) {
        throw NumericalError("training diverged at iteration " + std::to_string(it));
      }
      m[p] = kBeta1 * m[p] + (1.0 - kBeta1) * gu[p];
      v[p] = kBeta2 * v[p] + (1.0 - kBeta2) * gu[p] * gu[p];
      const double mhat = m[p] / (1.0 - std::pow(kBeta1, it + 1));
      const double vhat = v[p] / (1.0 - std::pow(kBeta2, it + 1));
      u[p] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
    // log alpha and log beta stay in a range where the kernel is well defined.
    u[0] = std::clamp(u[0], std::log(1e-3), std::log(1e6));
    u[1] = std::clamp(u[1], std::log(1e-4), std::log(1e6));
  }
  result.initial_loss = result.curve.front();
  result.final_loss = best;
  result.curve.push_back(best);
  return result;
}

std::string format_training_curve(const std::vector<double>& curve) {
  std::string out = "iter,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, curve[i]);
    out += buf;
  }
  return out;
}

}  // namespace s3
