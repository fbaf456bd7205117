#include "pcm/metrics.hpp"

#include "pcm/geometry.hpp"

#include <cmath>
#include <iostream>

namespace pcm {

double inlier_ratio(const std::vector<std::pair<Vec3, Vec3>>& K_pred,
                    const WarpFunction& warp_gt, double sigma) {
  if (K_pred.empty()) {
    std::cerr << "[pcm] warning: empty prediction set in inlier_ratio\n";
    return 0.0;
  }
  long long inliers = 0;
  for (const auto& [p, q] : K_pred)
    if ((warp_gt(p) - q).norm() < sigma) ++inliers;
  return static_cast<double>(inliers) / static_cast<double>(K_pred.size());
}

double inlier_ratio(const CorrespondenceSet& K_pred, const PointCloud& S,
                    const PointCloud& T, const WarpFunction& warp_gt, double sigma) {
  if (K_pred.empty()) {
    std::cerr << "[pcm] warning: empty prediction set in inlier_ratio\n";
    return 0.0;
  }
  long long inliers = 0;
  for (const auto& m : K_pred)
    if ((warp_gt.at(m.src, S[m.src]) - T[m.tgt]).norm() < sigma) ++inliers;
  return static_cast<double>(inliers) / static_cast<double>(K_pred.size());
}

Vec3 scene_flow_interpolate(const Vec3& u, const std::vector<Vec3>& anchors,
                            const std::vector<Vec3>& flows, int k) {
  if (anchors.empty() || anchors.size() != flows.size())
    throw ValidationError("anchor/flow size mismatch or empty anchors");
  KdTree tree(anchors);
  std::vector<int> ids = tree.knearest(u, k);
  // Exact coincidence: return that anchor's flow (nearest id is the smallest).
  for (int id : ids)
    if ((anchors[id] - u).norm() < 1e-12) return flows[id];
  Vec3 num = Vec3::Zero();
  double den = 0.0;
  for (int id : ids) {
    double w = 1.0 / (anchors[id] - u).norm();
    num += w * flows[id];
    den += w;
  }
  return num / den;
}

double nfmr(const std::vector<std::pair<Vec3, Vec3>>& K_pred,
            const std::vector<std::pair<Vec3, Vec3>>& K_gt, double sigma, int k) {
  if (K_gt.empty()) throw ValidationError("empty ground-truth set in nfmr");
  if (K_pred.empty()) return 0.0;
  std::vector<Vec3> anchors, flows;
  anchors.reserve(K_pred.size());
  flows.reserve(K_pred.size());
  for (const auto& [p, q] : K_pred) {
    anchors.push_back(p);
    flows.push_back(q - p);
  }
  KdTree tree(anchors);
  long long recalled = 0;
#pragma omp parallel for schedule(static) reduction(+ : recalled)
  for (long long g = 0; g < static_cast<long long>(K_gt.size()); ++g) {
    const auto& [u, v] = K_gt[g];
    Vec3 flow;
    std::vector<int> ids = tree.knearest(u, k);
    bool exact = false;
    for (int id : ids)
      if ((anchors[id] - u).norm() < 1e-12) {
        flow = flows[id];
        exact = true;
        break;
      }
    if (!exact) {
      Vec3 num = Vec3::Zero();
      double den = 0.0;
      for (int id : ids) {
        double w = 1.0 / (anchors[id] - u).norm();
        num += w * flows[id];
        den += w;
      }
      flow = num / den;
    }
    if ((u + flow - v).norm() < sigma) ++recalled;
  }
  return static_cast<double>(recalled) / static_cast<double>(K_gt.size());
}

double feature_matching_recall(const std::vector<double>& per_pair_irs, double threshold) {
  if (per_pair_irs.empty()) throw ValidationError("empty inlier-ratio list");
  long long above = 0;
  for (double ir : per_pair_irs)
    if (ir > threshold) ++above;
  return static_cast<double>(above) / static_cast<double>(per_pair_irs.size());
}

double registration_recall(const std::vector<RigidTransform>& estimates,
                           const std::vector<std::vector<std::pair<Vec3, Vec3>>>& gt_pairs,
                           double threshold) {
  if (estimates.size() != gt_pairs.size())
    throw ValidationError("estimate/ground-truth list length mismatch");
  if (estimates.empty()) throw ValidationError("empty estimate list");
  long long ok = 0;
  for (size_t i = 0; i < estimates.size(); ++i) {
    if (gt_pairs[i].empty()) throw ValidationError("empty ground-truth pair set");
    double se = 0.0;
    for (const auto& [p, q] : gt_pairs[i]) se += (estimates[i].apply(p) - q).squaredNorm();
    if (std::sqrt(se / gt_pairs[i].size()) < threshold) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(estimates.size());
}

FlowMetrics flow_metrics(const std::vector<Vec3>& pred_flow, const std::vector<Vec3>& gt_flow,
                         const MetricConfig& config) {
  if (pred_flow.empty() || pred_flow.size() != gt_flow.size())
    throw ValidationError("flow list length mismatch or empty");
  FlowMetrics out;
  long long a5 = 0, a10 = 0;
  for (size_t i = 0; i < pred_flow.size(); ++i) {
    double err = (pred_flow[i] - gt_flow[i]).norm();
    double rel = gt_flow[i].norm() > 0 ? err / gt_flow[i].norm()
                                       : (err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    out.epe += err;
    if (err < config.acc_abs_strict || rel < config.acc_rel_strict) ++a5;
    if (err < config.acc_abs_loose || rel < config.acc_rel_loose) ++a10;
  }
  out.epe /= static_cast<double>(pred_flow.size());
  out.acc5 = static_cast<double>(a5) / pred_flow.size();
  out.acc10 = static_cast<double>(a10) / pred_flow.size();
  return out;
}

}  // namespace pcm
