#pragma once

#include "pcm/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace pcm {

struct RigidPair {
  PointCloud S;
  PointCloud T;
  RigidTransform gt;        // maps source points onto their target positions
  CorrespondenceSet k_gt;   // exact pre-noise index pairs
};

/// Random surface patch, random SE(3), complementary crops hitting the overlap
/// target within +-5%, optional Gaussian noise on the target.
RigidPair synth_rigid_pair(std::uint64_t seed, int n_points, double overlap_fraction,
                           double noise_sigma);

enum class WarpKind { Bend, Twist, Wave };
WarpKind warp_kind_from_string(const std::string& name);

struct DeformablePair {
  PointCloud S;
  PointCloud T;
  WarpFunction gt;          // analytic smooth warp with closed form
  CorrespondenceSet k_gt;   // identity pairing
};

/// Analytic bend/twist/wave warp of a sampled patch; magnitude 0 is identity.
DeformablePair synth_deformable_pair(std::uint64_t seed, int n_points, WarpKind kind,
                                     double magnitude);

/// Best-of-N 3-point Procrustes hypotheses scored by inlier count, refined by
/// a uniform-weight fit on the inlier set.
RigidTransform ransac_rigid(const CorrespondenceSet& K_pred, const PointCloud& S,
                            const PointCloud& T, int iterations, double inlier_sigma,
                            std::uint64_t seed);

/// Deterministic rigid-invariant per-point descriptors for end-to-end runs
/// without a learned backbone: random Fourier features of the GT-aligned
/// coordinates. Rows follow the cloud order.
Eigen::MatrixXd coordinate_features(const PointCloud& cloud, int d, std::uint64_t seed);

}  // namespace pcm
