#include "pcm/synth.hpp"

#include "pcm/procrustes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pcm {

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  q.normalize();
  return q.toRotationMatrix();
}

// Wavy analytic surface patch over [0,xe] x [0,ye].
PointCloud sample_surface(std::mt19937_64& rng, int n, double xe, double ye) {
  std::uniform_real_distribution<double> ux(0.0, xe), uy(0.0, ye);
  PointCloud cloud;
  cloud.reserve(n);
  for (int i = 0; i < n; ++i) {
    double x = ux(rng), y = uy(rng);
    double z = 0.08 * std::sin(2.0 * M_PI * x / xe) * std::cos(2.0 * M_PI * y / ye) +
               0.04 * std::sin(5.0 * x + 3.0 * y);
    cloud.emplace_back(x, y, z);
  }
  return cloud;
}

}  // namespace

RigidPair synth_rigid_pair(std::uint64_t seed, int n_points, double overlap_fraction,
                           double noise_sigma) {
  if (overlap_fraction <= 0.0 || overlap_fraction > 1.0)
    throw ValidationError("overlap_fraction must be in (0,1]");
  if (n_points < 10) throw ValidationError("n_points too small");
  std::mt19937_64 rng(seed);
  PointCloud base = sample_surface(rng, n_points, 1.2, 0.8);
  std::sort(base.begin(), base.end(),
            [](const Vec3& a, const Vec3& b) { return a.x() < b.x(); });

  // Complementary crops along x sharing k points.
  int m_s = static_cast<int>(std::lround(n_points / (2.0 - overlap_fraction)));
  int k = static_cast<int>(std::lround(overlap_fraction * m_s));
  int t_begin = m_s - k;
  if (m_s < 5 || k < 1 || t_begin < 0)
    throw ValidationError("infeasible overlap target");

  RigidPair pair;
  pair.S.assign(base.begin(), base.begin() + m_s);

  std::mt19937_64 pose_rng(seed ^ 0xabcdef1234567890ull);
  pair.gt.R = random_rotation(pose_rng);
  std::uniform_real_distribution<double> ut(-0.5, 0.5);
  pair.gt.t = Vec3(ut(pose_rng), ut(pose_rng), ut(pose_rng));

  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (int i = t_begin; i < n_points; ++i) {
    Vec3 p = pair.gt.apply(base[i]);
    if (noise_sigma > 0.0) p += Vec3(noise(pose_rng), noise(pose_rng), noise(pose_rng));
    pair.T.push_back(p);
  }
  for (int i = t_begin; i < m_s; ++i) pair.k_gt.push_back({i, i - t_begin, 1.0});
  return pair;
}

WarpKind warp_kind_from_string(const std::string& name) {
  if (name == "bend") return WarpKind::Bend;
  if (name == "twist") return WarpKind::Twist;
  if (name == "wave") return WarpKind::Wave;
  throw ValidationError("unknown warp kind: " + name);
}

DeformablePair synth_deformable_pair(std::uint64_t seed, int n_points, WarpKind kind,
                                     double magnitude) {
  if (magnitude < 0.0) throw ValidationError("magnitude must be non-negative");
  std::mt19937_64 rng(seed);
  const double extent = 0.3;
  DeformablePair pair;
  pair.S = sample_surface(rng, n_points, extent, extent);
  for (auto& p : pair.S) p.z() *= 0.2;  // keep the patch thin

  auto rot_z = [](double angle) {
    Mat3 R;
    R << std::cos(angle), -std::sin(angle), 0, std::sin(angle), std::cos(angle), 0, 0, 0, 1;
    return R;
  };
  std::function<Vec3(const Vec3&)> fn;
  switch (kind) {
    case WarpKind::Bend:
      fn = [=](const Vec3& p) { return Vec3(rot_z(magnitude * p.x()) * p); };
      break;
    case WarpKind::Twist:
      fn = [=](const Vec3& p) { return Vec3(rot_z(magnitude * p.y() / extent) * p); };
      break;
    case WarpKind::Wave:
      fn = [=](const Vec3& p) {
        return Vec3(p.x(), p.y(),
                    p.z() + magnitude * std::sin(2.0 * M_PI * p.x() / extent));
      };
      break;
  }
  pair.gt = WarpFunction::analytic(fn);
  pair.T.reserve(pair.S.size());
  for (size_t i = 0; i < pair.S.size(); ++i) {
    pair.T.push_back(fn(pair.S[i]));
    pair.k_gt.push_back({static_cast<int>(i), static_cast<int>(i), 1.0});
  }
  return pair;
}

RigidTransform ransac_rigid(const CorrespondenceSet& K_pred, const PointCloud& S,
                            const PointCloud& T, int iterations, double inlier_sigma,
                            std::uint64_t seed) {
  if (K_pred.size() < 3) throw ValidationError("need at least 3 correspondences");
  if (iterations < 1 || inlier_sigma <= 0.0)
    throw ValidationError("invalid RANSAC parameters");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(K_pred.size()) - 1);

  int best_count = -1;
  RigidTransform best;
  for (int it = 0; it < iterations; ++it) {
    int a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    CorrespondenceSet sample{{K_pred[a].src, K_pred[a].tgt, 1.0},
                             {K_pred[b].src, K_pred[b].tgt, 1.0},
                             {K_pred[c].src, K_pred[c].tgt, 1.0}};
    RigidTransform hyp;
    try {
      hyp = soft_procrustes(sample, S, T);
    } catch (const NumericalError&) {
      continue;  // collinear sample
    }
    int count = 0;
    for (const auto& m : K_pred)
      if ((hyp.apply(S[m.src]) - T[m.tgt]).norm() < inlier_sigma) ++count;
    if (count > best_count) {
      best_count = count;
      best = hyp;
    }
  }
  if (best_count < 3) throw NumericalError("registration failed");

  CorrespondenceSet inliers;
  for (const auto& m : K_pred)
    if ((best.apply(S[m.src]) - T[m.tgt]).norm() < inlier_sigma)
      inliers.push_back({m.src, m.tgt, 1.0});
  return soft_procrustes(inliers, S, T);
}

Eigen::MatrixXd coordinate_features(const PointCloud& cloud, int d, std::uint64_t seed) {
  if (d <= 0) throw ValidationError("feature dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  const double length_scale = 0.15;
  Eigen::MatrixXd omega(d, 3);
  Eigen::VectorXd b(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < 3; ++j) omega(i, j) = gauss(rng) / length_scale;
    b[i] = phase(rng);
  }
  // Rows are normalized then rescaled so that score-matrix entries (feature
  // dot products divided by sqrt(d)) span an O(10) range and survive softmax.
  const double scale = std::sqrt(10.0) * std::pow(static_cast<double>(d), 0.25);
  Eigen::MatrixXd out(cloud.size(), d);
  for (size_t i = 0; i < cloud.size(); ++i) {
    Eigen::VectorXd f = ((omega * cloud[i]).array() + b.array()).cos();
    out.row(i) = (scale * f / f.norm()).transpose();
  }
  return out;
}

}  // namespace pcm
