#pragma once

#include "pcm/attention.hpp"
#include "pcm/matching.hpp"
#include "pcm/procrustes.hpp"
#include "pcm/types.hpp"

#include <array>
#include <cstdint>
#include <optional>

namespace pcm {

inline constexpr int kPipelineLayers = 2;

/// Weights for both transformer-matching-Procrustes passes.
struct PipelineWeights {
  std::array<TransformerWeights, kPipelineLayers> tmp;
  std::array<Eigen::MatrixXd, kPipelineLayers> W_S;  // matching projections, d x d
  std::array<Eigen::MatrixXd, kPipelineLayers> W_T;

  static PipelineWeights zero(int d);  // identity transformer, identity projections
  static PipelineWeights random(int d, std::uint64_t seed);
};

struct PipelineGroundTruth {
  WarpFunction warp = WarpFunction::identity();
  CorrespondenceSet k_gt;  // over the subsampled clouds
  double sigma = 0.1;      // overlap tolerance for the warping loss
  LossConfig loss;
};

struct PipelineOutput {
  CorrespondenceSet final_matches;
  std::array<Eigen::MatrixXd, kPipelineLayers> confidence;
  std::array<RigidTransform, kPipelineLayers> transform;
  std::array<CorrespondenceSet, kPipelineLayers> layer_matches;  // thresholded per layer
  bool reposition_skipped = false;
  std::optional<std::array<double, kPipelineLayers>> matching_losses;
  std::optional<std::array<double, kPipelineLayers>> warping_losses;
};

/// Two TMP passes with repositioning of the source position codes in between.
/// A degenerate layer-1 fit falls back to identity repositioning.
PipelineOutput run_pipeline(const PointCloud& S_hat, const PointCloud& T_hat,
                            const Eigen::MatrixXd& featS, const Eigen::MatrixXd& featT,
                            const PipelineWeights& weights, const MatchConfig& match_config,
                            const EncodingConfig& encoding_config,
                            const std::optional<PipelineGroundTruth>& gt = std::nullopt);

/// (L_m1 + L_m2) + lambda_w (L_w1 + L_w2); requires GT at pipeline time.
double total_loss(const PipelineOutput& output, double lambda_w);

}  // namespace pcm
