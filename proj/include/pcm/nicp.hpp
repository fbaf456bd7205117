#pragma once

#include "pcm/deform_graph.hpp"
#include "pcm/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace pcm {

/// One correspondence consumed by the non-rigid solver: 3D endpoints plus a
/// confidence weight.
struct NicpMatch {
  Vec3 src;
  Vec3 tgt;
  double confidence = 1.0;
};

struct NicpConfig {
  double lambda_c = 1.0;
  double lambda_a = 10.0;
  int max_iters = 50;
  double step_tol = 1e-10;    // stop when ||delta||_inf drops below
  double energy_tol = 1e-12;  // stop on relative energy decrease below
  double lm_damping = 1e-6;   // initial Levenberg diagonal

  void validate() const {
    if (lambda_c <= 0 || lambda_a <= 0) throw ValidationError("term weights must be positive");
    if (max_iters < 1) throw ValidationError("max_iters must be at least 1");
    if (lm_damping < 0) throw ValidationError("lm_damping must be non-negative");
  }
};

/// r^corr = sqrt(lambda_c) * c * (W(p_s) - p_t).
Vec3 corr_residual(const NicpMatch& match, const DeformationGraph& graph,
                   const GraphState& state, const NicpConfig& config);

/// r^reg = sqrt(lambda_a) * (R_i (g_j - g_i) + g_i + t_i - (g_j + t_j)).
Vec3 reg_residual(int i, int j, const DeformationGraph& graph, const GraphState& state,
                  const NicpConfig& config);

/// Stacked residuals (correspondence block first) and the block-sparse Jacobian
/// with phi columns before t columns, evaluated at phi = 0.
struct AssembledSystem {
  Eigen::SparseMatrix<double> J;  // 3(|K|+|E|) x 6|V|
  Eigen::VectorXd r;
};

AssembledSystem assemble(const DeformationGraph& graph, const GraphState& state,
                         const std::vector<NicpMatch>& matches, const NicpConfig& config);

/// lambda_c sum c^2 ||W(p_s)-p_t||^2 + lambda_a sum_edges ||.||^2; equals ||r||^2.
double energy(const DeformationGraph& graph, const GraphState& state,
              const std::vector<NicpMatch>& matches, const NicpConfig& config);

struct IterationRecord {
  int iteration = 0;
  double energy = 0.0;
  double step_norm = 0.0;  // ||delta||_inf of the accepted step
  double damping = 0.0;
  bool accepted = true;
};

struct NicpResult {
  GraphState state;
  std::vector<IterationRecord> trace;  // accepted steps, energies non-increasing
  /// Trace rows as JSON lines (iteration, energy, step_norm, damping).
  std::string trace_json() const;
};

/// Gauss-Newton with Levenberg damping: (J^T J + mu I) delta = -J^T r, direct
/// factorization (dense LU up to 1500 nodes, sparse LU above).
NicpResult gauss_newton_solve(const DeformationGraph& graph, const GraphState& initial_state,
                              const std::vector<NicpMatch>& matches, const NicpConfig& config);

}  // namespace pcm
