#pragma once

#include "pcm/pipeline.hpp"
#include "pcm/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace pcm {

// --- PLY ------------------------------------------------------------------

/// Writes element "vertex" with double x,y,z. Binary mode preserves 64-bit
/// coordinates exactly.
void write_ply(const std::string& path, const PointCloud& cloud, bool binary = true);

/// Reads ASCII or binary_little_endian PLY; float or double coordinates;
/// unknown vertex properties and other elements are skipped.
PointCloud read_ply(const std::string& path);

// --- MatrixFile (LPRD) ----------------------------------------------------

/// Binary layout: magic "LPRD", u32 version=1, u32 rank, u64 dims[rank],
/// little-endian float64 payload, row-major.
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

// --- Weights bundle (LPWB) ------------------------------------------------

/// Named matrix container: magic "LPWB", u32 version=1, u32 count, then per
/// entry u16 name length, name bytes, and an embedded LPRD record.
void write_weights(const std::string& path, const PipelineWeights& weights);
PipelineWeights read_weights(const std::string& path);

// --- Correspondence / transform JSON --------------------------------------

std::string correspondences_to_json(const CorrespondenceSet& set);
CorrespondenceSet correspondences_from_json(const std::string& text);

std::string transform_to_json(const RigidTransform& tf);  // {"R":[9 row-major],"t":[3]}
RigidTransform transform_from_json(const std::string& text);

// --- Run configuration ----------------------------------------------------

struct RunConfig {
  std::string mode = "rigid";  // "rigid" (3DMatch-style) or "deformable" (4DMatch-style)
  int feature_dim = 528;
  double encoding_base = 10000.0;
  double inlier_sigma = 0.1;
  double rr_rmse_threshold = 0.2;
  double fmr_ir_threshold = 0.05;
  double confidence_threshold = 0.05;
  bool apply_mnn = false;
  double subsample_voxel = 0.025;
  double gt_match_radius = 0.06;
  double warping_loss_weight = 0.0;
  double lambda_c = 1.0;
  double lambda_a = 10.0;
  double node_spacing = 0.02;
  int edge_k = 8;
  int skin_k = 6;
  double gamma_skin = 0.009;
  int min_component_nodes = 40;
  int nicp_max_iters = 50;
  int ransac_iterations = 2000;
  double ransac_inlier_sigma = 0.05;
  std::uint64_t seed = 0;

  /// Supplementary-table defaults for the two dataset modes.
  static RunConfig defaults(const std::string& mode);

  std::string to_json() const;
  /// Parses and schema-validates; unknown keys are rejected.
  static RunConfig from_json(const std::string& text);
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pcm
