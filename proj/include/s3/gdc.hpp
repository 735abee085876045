#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "s3/camera.hpp"
#include "s3/core.hpp"

namespace s3 {

/// k-nearest-neighbor reconstruction graph over 3-D points. Row i holds the
/// k neighbors of node i and weights that reconstruct its depth (z) from
/// theirs. Every row sums to one.
class NeighborGraph {
 public:
  NeighborGraph(std::size_t nodes, int k, std::vector<std::size_t> neighbors,
                std::vector<double> weights);

  std::size_t size() const { return nodes_; }
  int k() const { return k_; }
  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {neighbors_.data() + i * k_, static_cast<std::size_t>(k_)};
  }
  std::span<const double> weights(std::size_t i) const {
    return {weights_.data() + i * k_, static_cast<std::size_t>(k_)};
  }

  /// (z - Wz)_i for every node.
  std::vector<double> residual(std::span<const double> z) const;
  /// ||z - Wz||^2
  double objective(std::span<const double> z) const;

 private:
  std::size_t nodes_;
  int k_;
  std::vector<std::size_t> neighbors_;
  std::vector<double> weights_;
};

struct GraphOptions {
  int k = 10;
  /// Tikhonov weight relative to the mean squared 3-D neighbor distance.
  double regularization = 1e-3;
};

/// Neighbors by 3-D Euclidean distance (ties to the lower index). Weights
/// minimize (z_i - sum_j w_ij z_j)^2 + eps_i |w_i|^2 subject to sum_j w_ij = 1,
/// eps_i = regularization * mean_j |p_i - p_j|^2.
NeighborGraph build_graph(std::span<const Eigen::Vector3d> points, const GraphOptions& opts);
NeighborGraph build_graph(const PointCloud3D& cloud, const GraphOptions& opts);

/// Correction problem. Nodes are ordered hints first, expanded next, free last.
struct GdcProblem {
  std::vector<double> depth;                // Z, one entry per node
  std::size_t hints = 0;                    // n
  std::size_t expanded = 0;                 // n_e
  std::vector<double> hint_values;          // G, n entries
  std::vector<double> expanded_values;      // G_exp, n_e entries
  std::vector<double> expanded_confidence;  // C, n_e entries in [0,1]

  std::size_t size() const { return depth.size(); }
  std::size_t free_count() const { return depth.size() - hints - expanded; }
  void validate() const;
};

enum class SolverKind { ConjugateGradient, Dense };

/// What to do with free nodes whose graph component contains no anchor.
enum class UnanchoredPolicy {
  Error,   // NumericalError with a null-space diagnosis
  Freeze,  // keep their input depth
};

struct SolverOptions {
  SolverKind kind = SolverKind::ConjugateGradient;
  double tolerance = 1e-10;  // relative residual of the normal equations
  int max_iterations = 0;    // 0 means 10 * N
  UnanchoredPolicy unanchored = UnanchoredPolicy::Error;
};

struct GdcSolution {
  std::vector<double> depth;  // corrected depth per node, same order as the problem
  int iterations = 0;
  double objective = 0.0;      // ||Y - WY||^2 at the solution
  double gradient_norm = 0.0;  // of the objective w.r.t. the solved coordinates
};

/// Minimizes ||Z' - WZ'||^2 with hint coordinates fixed to G. Expanded nodes,
/// if any, are treated as free.
GdcSolution correct(const GdcProblem& problem, const NeighborGraph& graph,
                    const SolverOptions& opts = {});

/// Confidence-weighted correction. Each expanded node is anchored at
/// C * G_exp + (1 - C) * Z8, where Z8 is the hints-only correction, and the
/// free nodes are re-solved. C = 0 reproduces correct(); C = 1 treats the
/// expanded nodes as hints.
GdcSolution correct_with_confidence(const GdcProblem& problem, const NeighborGraph& graph,
                                    const SolverOptions& opts = {});

/// Lower-level entry: minimizes ||Y - WY||^2 over nodes with fixed[i] == 0,
/// holding the others at `values`. `values` also provides the starting point.
GdcSolution solve_anchored(const NeighborGraph& graph, std::span<const std::uint8_t> fixed,
                           std::span<const double> values, const SolverOptions& opts);

/// Node table text: header `idx,x,y,z,role,value,confidence`, role in hint|exp|free.
struct GdcInstance {
  std::vector<Eigen::Vector3d> points;
  GdcProblem problem;
};

std::string format_gdc_instance(const GdcInstance& instance);
GdcInstance parse_gdc_instance(std::string_view text);

}  // namespace s3
