#pragma once

#include "pcm/types.hpp"

#include <vector>

namespace pcm {

struct MetricConfig {
  double sigma_inlier = 0.1;      // 0.04 m deformable, 0.1 m rigid
  double fmr_ir_threshold = 0.05;
  double rr_rmse_threshold = 0.2;
  int knn_k = 3;
  double acc_abs_strict = 0.05, acc_rel_strict = 0.05;
  double acc_abs_loose = 0.1, acc_rel_loose = 0.1;
};

/// Fraction of predicted pairs whose GT-warped source lands within sigma of
/// the paired target point. Pairs are (src point, tgt point) in 3D.
double inlier_ratio(const std::vector<std::pair<Vec3, Vec3>>& K_pred,
                    const WarpFunction& warp_gt, double sigma);

/// Convenience overload resolving ids against clouds.
double inlier_ratio(const CorrespondenceSet& K_pred, const PointCloud& S,
                    const PointCloud& T, const WarpFunction& warp_gt, double sigma);

/// Inverse-distance interpolation of sparse flows at u over the k nearest
/// anchors; exact anchor coincidence returns that anchor's flow.
Vec3 scene_flow_interpolate(const Vec3& u, const std::vector<Vec3>& anchors,
                            const std::vector<Vec3>& flows, int k);

/// Fraction of GT pairs (u,v) with ||u + interpolated flow - v|| < sigma,
/// flows built from the predicted pairs.
double nfmr(const std::vector<std::pair<Vec3, Vec3>>& K_pred,
            const std::vector<std::pair<Vec3, Vec3>>& K_gt, double sigma, int k);

/// Fraction of per-pair inlier ratios strictly above 0.05.
double feature_matching_recall(const std::vector<double>& per_pair_irs,
                               double threshold = 0.05);

/// Per pair: RMSE of ||R p + t - q|| over GT pairs; recall counts RMSE < threshold.
double registration_recall(const std::vector<RigidTransform>& estimates,
                           const std::vector<std::vector<std::pair<Vec3, Vec3>>>& gt_pairs,
                           double threshold);

struct FlowMetrics {
  double epe = 0.0;
  double acc5 = 0.0;
  double acc10 = 0.0;
};

/// EPE = mean endpoint error; AccX counts errors under X m or X percent.
FlowMetrics flow_metrics(const std::vector<Vec3>& pred_flow, const std::vector<Vec3>& gt_flow,
                         const MetricConfig& config = {});

}  // namespace pcm
