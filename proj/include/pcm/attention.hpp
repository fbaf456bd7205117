#pragma once

#include "pcm/rope.hpp"
#include "pcm/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace pcm {

/// 3-layer MLP: 2d -> d -> d -> d, GELU between layers, linear output.
struct Mlp {
  Eigen::MatrixXd w1, w2, w3;  // d x 2d, d x d, d x d
  Eigen::VectorXd b1, b2, b3;

  Eigen::VectorXd apply(const Eigen::VectorXd& in) const;
  static Mlp zero(int d);
};

struct AttentionWeights {
  Eigen::MatrixXd W_q, W_k, W_v;  // d x d
  Mlp mlp;

  static AttentionWeights zero(int d);
  /// Seeded uniform(-1/sqrt(d), 1/sqrt(d)) initializer for tests and demos.
  static AttentionWeights random(int d, std::uint64_t seed);
};

/// Shared self and cross layers of one transformer block.
struct TransformerWeights {
  AttentionWeights self;
  AttentionWeights cross;

  static TransformerWeights zero(int d);
  static TransformerWeights random(int d, std::uint64_t seed);
};

/// Position-aware self attention. q and k rows are position-encoded, v is not;
/// the update is x_i <- x_i + MLP(cat[q_i, sum_j a_ij v_j]).
Eigen::MatrixXd self_attention(const Eigen::MatrixXd& features, const PointCloud& positions,
                               const AttentionWeights& weights, const EncodingConfig& config);

/// Same computation with q from one cloud and k,v from the other.
Eigen::MatrixXd cross_attention(const Eigen::MatrixXd& features_q, const PointCloud& positions_q,
                                const Eigen::MatrixXd& features_kv, const PointCloud& positions_kv,
                                const AttentionWeights& weights, const EncodingConfig& config);

/// Self attention on each cloud, then cross attention in both directions.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> transformer_block(
    const Eigen::MatrixXd& featS, const PointCloud& posS, const Eigen::MatrixXd& featT,
    const PointCloud& posT, const TransformerWeights& weights, const EncodingConfig& config);

struct LossConfig {
  double alpha = 0.25;
  double gamma_focal = 2.0;
  double lambda_w = 0.1;

  void validate() const {
    if (alpha <= 0.0 || alpha >= 1.0) throw ValidationError("alpha must be in (0,1)");
    if (gamma_focal < 0.0 || lambda_w < 0.0) throw ValidationError("negative loss parameter");
  }
};

/// Focal loss over confidence entries at ground-truth pairs. Entries equal to
/// zero are clamped to 1e-12 (reported on stderr).
double matching_loss(const Eigen::MatrixXd& C, const CorrespondenceSet& K_gt,
                     const LossConfig& config);

/// Mean L1 deviation between the GT warp and the rigid fit over overlap ids.
double warping_loss(const PointCloud& S_hat, const RigidTransform& transform,
                    const WarpFunction& warp_gt, const std::vector<int>& overlap_ids);

}  // namespace pcm
