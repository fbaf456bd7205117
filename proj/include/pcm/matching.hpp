#pragma once

#include "pcm/rope.hpp"
#include "pcm/types.hpp"

#include <Eigen/Dense>

namespace pcm {

struct MatchConfig {
  double theta_c = 0.05;  // confidence threshold
  bool use_mnn = false;

  void validate() const {
    if (theta_c < 0.0 || theta_c >= 1.0) throw ValidationError("theta_c must be in [0,1)");
  }
};

/// S(i,j) = (1/sqrt(d)) <Theta(posS_i) W_S x_i, Theta(posT_j) W_T x_j>.
Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& featS, const PointCloud& posS,
                             const Eigen::MatrixXd& featT, const PointCloud& posT,
                             const Eigen::MatrixXd& W_S, const Eigen::MatrixXd& W_T,
                             const EncodingConfig& config);

/// Elementwise product of row-wise and column-wise softmax (max-subtracted).
Eigen::MatrixXd dual_softmax(const Eigen::MatrixXd& S);

/// Serial reference for dual_softmax, kept for tests and benchmarks.
Eigen::MatrixXd dual_softmax_serial(const Eigen::MatrixXd& S);

/// Pairs above theta_c, optionally restricted to mutual row/column argmax.
CorrespondenceSet select_matches(const Eigen::MatrixXd& C, const MatchConfig& config);

/// The n_hat highest-confidence cells (ties row-major), weights normalized to sum 1.
CorrespondenceSet top_soft_matches(const Eigen::MatrixXd& C, int n_hat);

}  // namespace pcm
