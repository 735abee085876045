#include "s3/gdc.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace s3 {

NeighborGraph::NeighborGraph(std::size_t nodes, int k, std::vector<std::size_t> neighbors,
                             std::vector<double> weights)
    : nodes_(nodes), k_(k), neighbors_(std::move(neighbors)), weights_(std::move(weights)) {
  if (k < 1) throw Error("graph needs k >= 1");
  if (neighbors_.size() != nodes * k || weights_.size() != nodes * k) {
    throw Error("graph payload size mismatch");
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const auto nb = neighbors_[i * k + j];
      if (nb >= nodes) throw Error("graph neighbor index out of range");
      if (nb == i) throw Error("graph contains a self-loop");
      if (!std::isfinite(weights_[i * k + j])) throw Error("non-finite graph weight");
      sum += weights_[i * k + j];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("graph row does not sum to one");
  }
}

std::vector<double> NeighborGraph::residual(std::span<const double> z) const {
  if (z.size() != nodes_) throw Error("depth vector size does not match the graph");
  std::vector<double> r(nodes_);
  for (std::size_t i = 0; i < nodes_; ++i) {
    double recon = 0.0;
    for (int j = 0; j < k_; ++j) recon += weights_[i * k_ + j] * z[neighbors_[i * k_ + j]];
    r[i] = z[i] - recon;
  }
  return r;
}

double NeighborGraph::objective(std::span<const double> z) const {
  double total = 0.0;
  for (double r : residual(z)) total += r * r;
  return total;
}

NeighborGraph build_graph(std::span<const Eigen::Vector3d> points, const GraphOptions& opts) {
  const std::size_t n = points.size();
  const int k = opts.k;
  if (k < 1 || n <= static_cast<std::size_t>(k)) {
    throw Error("build_graph needs N > k >= 1 (N=" + std::to_string(n) +
                ", k=" + std::to_string(k) + ")");
  }
  if (!(opts.regularization >= 0.0) || !std::isfinite(opts.regularization)) {
    throw Error("graph regularization must be >= 0");
  }
  std::vector<std::size_t> neighbors(n * k);
  std::vector<double> weights(n * k);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n);
  Eigen::MatrixXd gram(k, k);
  Eigen::VectorXd u(k);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back((points[j] - points[i]).squaredNorm(), j);
    }
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    std::sort(cand.begin(), cand.begin() + k);

    double mean_sq = 0.0;
    for (int a = 0; a < k; ++a) {
      neighbors[i * k + a] = cand[a].second;
      u[a] = points[i].z() - points[cand[a].second].z();
      mean_sq += cand[a].first;
    }
    mean_sq /= k;
    const double eps = opts.regularization * mean_sq;
    gram.noalias() = u * u.transpose();
    gram.diagonal().array() += eps;

    Eigen::VectorXd w;
    if (eps > 0.0) {
      w = gram.ldlt().solve(Eigen::VectorXd::Ones(k));
    } else {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (lu.rank() < k) {
        throw Error("degenerate neighborhood at node " + std::to_string(i) +
                    " with zero regularization");
      }
      w = lu.solve(Eigen::VectorXd::Ones(k));
    }
    const double sum = w.sum();
    if (!std::isfinite(sum) || std::abs(sum) < 1e-300) {
      throw Error("degenerate neighborhood at node " + std::to_string(i));
    }
    w /= sum;
    for (int a = 0; a < k; ++a) weights[i * k + a] = w[a];
  }
  return NeighborGraph(n, k, std::move(neighbors), std::move(weights));
}

NeighborGraph build_graph(const PointCloud3D& cloud, const GraphOptions& opts) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.emplace_back(p.x, p.y, p.z);
  return build_graph(pts, opts);
}

void GdcProblem::validate() const {
  if (hints + expanded > depth.size()) throw Error("gdc problem counts exceed node count");
  if (hint_values.size() != hints) throw Error("gdc problem needs one value per hint");
  if (expanded_values.size() != expanded || expanded_confidence.size() != expanded) {
    throw Error("gdc problem needs one value and confidence per expanded node");
  }
  for (double z : depth) {
    if (!std::isfinite(z)) throw Error("gdc problem depth must be finite");
  }
  for (double c : expanded_confidence) {
    if (!(c >= 0.0 && c <= 1.0)) throw Error("gdc confidence outside [0,1]");
  }
  for (double v : hint_values) {
    if (!std::isfinite(v)) throw Error("gdc hint values must be finite");
  }
  for (double v : expanded_values) {
    if (!std::isfinite(v)) throw Error("gdc expanded values must be finite");
  }
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Free nodes in graph components (undirected) that contain no fixed node.
std::vector<std::size_t> unanchored_nodes(const NeighborGraph& graph,
                                          std::span<const std::uint8_t> fixed) {
  const std::size_t n = graph.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : graph.neighbors(i)) {
      const auto a = find_root(parent, i);
      const auto b = find_root(parent, j);
      if (a != b) parent[a] = b;
    }
  }
  std::vector<std::uint8_t> anchored(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (fixed[i]) anchored[find_root(parent, i)] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!fixed[i] && !anchored[find_root(parent, i)]) out.push_back(i);
  }
  return out;
}

}  // namespace

GdcSolution solve_anchored(const NeighborGraph& graph, std::span<const std::uint8_t> fixed_in,
                           std::span<const double> values, const SolverOptions& opts) {
  const std::size_t n = graph.size();
  if (fixed_in.size() != n || values.size() != n) {
    throw Error("anchored solve: input sizes do not match the graph");
  }
  std::vector<std::uint8_t> fixed(fixed_in.begin(), fixed_in.end());
  const auto loose = unanchored_nodes(graph, fixed);
  if (!loose.empty()) {
    if (opts.unanchored == UnanchoredPolicy::Error) {
      throw NumericalError("singular system: " + std::to_string(loose.size()) +
                           " free nodes lie in graph components without any anchor "
                           "(constant offsets there are in the null space), first node " +
                           std::to_string(loose.front()));
    }
    for (auto i : loose) fixed[i] = 1;
  }

  std::vector<std::ptrdiff_t> col_of(n, -1);
  std::vector<std::size_t> free_nodes;
  for (std::size_t i = 0; i < n; ++i) {
    if (!fixed[i]) {
      col_of[i] = static_cast<std::ptrdiff_t>(free_nodes.size());
      free_nodes.push_back(i);
    }
  }
  const auto nf = static_cast<Eigen::Index>(free_nodes.size());

  GdcSolution sol;
  sol.depth.assign(values.begin(), values.end());
  if (nf == 0) {
    sol.objective = graph.objective(sol.depth);
    return sol;
  }

  // A = I - W restricted to free columns; b = -(A restricted to fixed columns) * y_fixed.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n * (graph.k() + 1));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (fixed[i]) {
      b[row] -= values[i];
    } else {
      trips.emplace_back(row, col_of[i], 1.0);
    }
    const auto nb = graph.neighbors(i);
    const auto wt = graph.weights(i);
    for (std::size_t a = 0; a < nb.size(); ++a) {
      if (fixed[nb[a]]) {
        b[row] += wt[a] * values[nb[a]];
      } else {
        trips.emplace_back(row, col_of[nb[a]], -wt[a]);
      }
    }
  }
  Eigen::SparseMatrix<double> af(static_cast<Eigen::Index>(n), nf);
  af.setFromTriplets(trips.begin(), trips.end());
  const Eigen::VectorXd rhs = af.transpose() * b;

  Eigen::VectorXd x(nf);
  for (Eigen::Index c = 0; c < nf; ++c) x[c] = values[free_nodes[c]];

  if (opts.kind == SolverKind::Dense) {
    // Least squares on the dense A_f directly; forming A^T A would square its condition.
    const Eigen::MatrixXd dense = Eigen::MatrixXd(af);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dense);
    if (qr.rank() < nf) {
      throw NumericalError("singular system: reduced matrix rank " + std::to_string(qr.rank()) +
                           " < " + std::to_string(nf) + " free coordinates");
    }
    x = qr.solve(b);
  } else {
    // Jacobi-preconditioned conjugate gradient on A^T A x = A^T b, applying
    // A and A^T separately instead of forming the normal matrix.
    const Eigen::SparseMatrix<double> aft = af.transpose();
    Eigen::VectorXd inv_diag(nf);
    for (Eigen::Index c = 0; c < nf; ++c) {
      const double d = af.col(c).squaredNorm();
      inv_diag[c] = d > 0.0 ? 1.0 / d : 1.0;
    }
    const int cap = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * n);
    const double stop = opts.tolerance * std::max(rhs.norm(), 1.0);
    Eigen::VectorXd r = rhs - aft * (af * x);
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    int it = 0;
    while (r.norm() > stop) {
      if (it >= cap) {
        throw NumericalError("conjugate gradient did not converge within " +
                             std::to_string(cap) + " iterations (residual " +
                             std::to_string(r.norm()) + ")");
      }
      const Eigen::VectorXd ap = aft * (af * p);
      const double pap = p.dot(ap);
      if (!(pap > 0.0) || !std::isfinite(pap)) {
        throw NumericalError("conjugate gradient breakdown at iteration " + std::to_string(it));
      }
      const double step = rz / pap;
      x += step * p;
      r -= step * ap;
      z = inv_diag.cwiseProduct(r);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
      ++it;
    }
    sol.iterations = it;
  }

  for (Eigen::Index c = 0; c < nf; ++c) sol.depth[free_nodes[c]] = x[c];
  for (double v : sol.depth) {
    if (!std::isfinite(v)) throw NumericalError("non-finite corrected depth");
  }
  const Eigen::VectorXd res = af * x - b;
  sol.objective = res.squaredNorm();
  sol.gradient_norm = 2.0 * (af.transpose() * res).norm();
  return sol;
}

GdcSolution correct(const GdcProblem& problem, const NeighborGraph& graph,
                    const SolverOptions& opts) {
  problem.validate();
  if (graph.size() != problem.size()) throw Error("graph and problem node counts differ");
  if (problem.hints == 0) throw Error("correction needs at least one hint");
  std::vector<std::uint8_t> fixed(problem.size(), 0);
  std::vector<double> values = problem.depth;
  for (std::size_t i = 0; i < problem.hints; ++i) {
    fixed[i] = 1;
    values[i] = problem.hint_values[i];
  }
  return solve_anchored(graph, fixed, values, opts);
}

GdcSolution correct_with_confidence(const GdcProblem& problem, const NeighborGraph& graph,
                                    const SolverOptions& opts) {
  const auto hints_only = correct(problem, graph, opts);
  if (problem.expanded == 0) return hints_only;
  std::vector<std::uint8_t> fixed(problem.size(), 0);
  std::vector<double> values = hints_only.depth;
  for (std::size_t i = 0; i < problem.hints + problem.expanded; ++i) fixed[i] = 1;
  for (std::size_t e = 0; e < problem.expanded; ++e) {
    const auto idx = problem.hints + e;
    const double c = problem.expanded_confidence[e];
    values[idx] = c * problem.expanded_values[e] + (1.0 - c) * hints_only.depth[idx];
  }
  auto sol = solve_anchored(graph, fixed, values, opts);
  sol.iterations += hints_only.iterations;
  return sol;
}

std::string format_gdc_instance(const GdcInstance& instance) {
  const auto& p = instance.problem;
  p.validate();
  if (instance.points.size() != p.size()) throw Error("gdc instance point count mismatch");
  std::string out = "idx,x,y,z,role,value,confidence\n";
  char buf[256];
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& pt = instance.points[i];
    const char* role = "free";
    double value = p.depth[i];
    double conf = 0.0;
    if (i < p.hints) {
      role = "hint";
      value = p.hint_values[i];
      conf = 1.0;
    } else if (i < p.hints + p.expanded) {
      role = "exp";
      value = p.expanded_values[i - p.hints];
      conf = p.expanded_confidence[i - p.hints];
    }
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%s,%.17g,%.17g\n", i, pt.x(), pt.y(),
                  pt.z(), role, value, conf);
    out += buf;
  }
  return out;
}

GdcInstance parse_gdc_instance(std::string_view text) {
  GdcInstance inst;
  auto& p = inst.problem;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("idx,x,y,z,role,value,confidence", 0) != 0) {
    throw FormatError("malformed header: expected gdc node table header", 0);
  }
  std::size_t offset = line.size() + 1;
  int stage = 0;  // 0 hints, 1 expanded, 2 free
  while (std::getline(in, line)) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw FormatError("malformed record: expected 7 fields", at);
    double x = 0, y = 0, z = 0, value = 0, conf = 0;
    try {
      if (std::stoull(cells[0]) != p.depth.size()) {
        throw FormatError("malformed record: node indices must be consecutive", at);
      }
      x = std::stod(cells[1]);
      y = std::stod(cells[2]);
      z = std::stod(cells[3]);
      value = std::stod(cells[5]);
      conf = std::stod(cells[6]);
    } catch (const std::logic_error&) {
      throw FormatError("malformed record: bad number", at);
    }
    const auto& role = cells[4];
    const int role_stage = role == "hint" ? 0 : role == "exp" ? 1 : role == "free" ? 2 : -1;
    if (role_stage < 0) throw FormatError("malformed record: unknown role '" + role + "'", at);
    if (role_stage < stage) {
      throw FormatError("malformed record: roles must be ordered hint, exp, free", at);
    }
    stage = role_stage;
    inst.points.emplace_back(x, y, z);
    p.depth.push_back(z);
    if (role_stage == 0) {
      ++p.hints;
      p.hint_values.push_back(value);
    } else if (role_stage == 1) {
      ++p.expanded;
      p.expanded_values.push_back(value);
      p.expanded_confidence.push_back(conf);
    }
  }
  p.validate();
  return inst;
}

}  // namespace s3
