#pragma once

#include "pcm/types.hpp"

namespace pcm {

enum class ProcrustesVariant {
  Kabsch,     // weighted Kabsch with centroid subtraction (default)
  AsPrinted,  // uncentered cross-covariance variant, kept for comparison
};

/// Confidence-weighted rigid fit minimizing sum_k w_k ||R s_k + t - t_k||^2.
/// Weights are taken from the correspondence confidences and normalized
/// internally; scaling all weights by a positive constant changes nothing.
RigidTransform soft_procrustes(const CorrespondenceSet& K_soft, const PointCloud& S,
                               const PointCloud& T,
                               ProcrustesVariant variant = ProcrustesVariant::Kabsch);

/// Apply a rigid transform to every position; feature values are untouched
/// by design of the position/feature split.
PointCloud reposition(const PointCloud& posS, const RigidTransform& transform);

}  // namespace pcm
