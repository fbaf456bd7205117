#pragma once

#include "pcm/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace pcm {

struct DeformationGraph {
  std::vector<Vec3> nodes;
  std::vector<std::pair<int, int>> edges;  // undirected, stored with first < second
  double gamma_skin = 0.009;               // Gaussian coverage radius, meters
  int skin_k = 6;                          // skinning truncated to this many nodes

  std::string to_json() const;
  static DeformationGraph from_json(const std::string& text);
};

/// Per-node rigid motion. Rotations accumulate across solver updates; the
/// axis-angle delta is implicitly zero between updates.
struct GraphState {
  std::vector<Mat3> R;
  std::vector<Vec3> t;

  static GraphState identity(int n_nodes);
};

struct GraphBuildConfig {
  double node_spacing = 0.02;
  int edge_k = 8;
  double gamma_skin = 0.009;
  int skin_k = 6;
  int min_component_nodes = 40;  // clusters below this are dropped; 0 disables
};

/// Greedy radius sampling of nodes over the cloud, symmetric kNN edges,
/// small connected components removed.
DeformationGraph build_graph(const PointCloud& cloud, const GraphBuildConfig& config);

struct SkinWeight {
  int node = 0;
  double w = 0.0;
};

/// Normalized Gaussian weights over the skin_k nearest nodes.
std::vector<SkinWeight> skinning_weights(const Vec3& p, const DeformationGraph& graph);

/// Blended per-node rigid transform: sum_i w_i (R_i (p - g_i) + g_i + t_i).
Vec3 warp_point(const Vec3& p, const DeformationGraph& graph, const GraphState& state);

/// Warp every point of a cloud (parallel).
PointCloud warp_cloud(const PointCloud& cloud, const DeformationGraph& graph,
                      const GraphState& state);

Mat3 skew(const Vec3& v);

/// Rodrigues formula, with the series expansion below 1e-8 angle.
Mat3 exp_so3(const Vec3& phi);

/// delta is laid out as (phi_1..phi_n | t_1..t_n); R_i <- exp(dphi_i^) R_i
/// re-orthonormalized, t_i <- t_i + dt_i.
GraphState apply_update(const GraphState& state, const Eigen::VectorXd& delta);

}  // namespace pcm
