#include "pcm/procrustes.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace pcm {

RigidTransform soft_procrustes(const CorrespondenceSet& K_soft, const PointCloud& S,
                               const PointCloud& T, ProcrustesVariant variant) {
  if (K_soft.size() < 3) throw NumericalError("degenerate configuration: fewer than 3 pairs");
  double wsum = 0.0;
  for (const auto& m : K_soft) {
    if (m.src < 0 || m.src >= static_cast<int>(S.size()) || m.tgt < 0 ||
        m.tgt >= static_cast<int>(T.size()))
      throw ValidationError("correspondence id out of range");
    if (m.confidence < 0.0) throw ValidationError("negative correspondence weight");
    wsum += m.confidence;
  }
  if (wsum <= 0.0) throw NumericalError("degenerate configuration: zero total weight");

  if (variant == ProcrustesVariant::AsPrinted) {
    // H from raw coordinates, R = U diag(1,1,det(UV^T)) V, t averaging through R.
    Mat3 H = Mat3::Zero();
    Vec3 sum_s = Vec3::Zero(), sum_t = Vec3::Zero();
    for (const auto& m : K_soft) {
      H += (m.confidence / wsum) * S[m.src] * T[m.tgt].transpose();
      sum_s += S[m.src];
      sum_t += T[m.tgt];
    }
    Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU(), V = svd.matrixV();
    Mat3 D = Mat3::Identity();
    D(2, 2) = (U * V.transpose()).determinant();
    RigidTransform tf;
    tf.R = U * D * V;
    tf.t = (sum_s - tf.R * sum_t) / static_cast<double>(K_soft.size());
    return tf;
  }

  Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
  for (const auto& m : K_soft) {
    mu_s += (m.confidence / wsum) * S[m.src];
    mu_t += (m.confidence / wsum) * T[m.tgt];
  }
  Mat3 H = Mat3::Zero();
  for (const auto& m : K_soft)
    H += (m.confidence / wsum) * (S[m.src] - mu_s) * (T[m.tgt] - mu_t).transpose();

  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3& sv = svd.singularValues();
  double scale = std::max(sv[0], 1.0);
  if (sv[1] < 1e-12 * scale)
    throw NumericalError("degenerate configuration");
  Mat3 U = svd.matrixU(), V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  D(2, 2) = (V * U.transpose()).determinant();
  RigidTransform tf;
  tf.R = V * D * U.transpose();
  tf.t = mu_t - tf.R * mu_s;
  return tf;
}

PointCloud reposition(const PointCloud& posS, const RigidTransform& transform) {
  PointCloud out(posS.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(posS.size()); ++i)
    out[i] = transform.apply(posS[i]);
  return out;
}

}  // namespace pcm
