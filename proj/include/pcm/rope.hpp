#pragma once

#include "pcm/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pcm {

struct EncodingConfig {
  int d = 528;           // feature dimension, must be divisible by 6
  double base = 10000.0;

  void validate() const {
    if (d <= 0 || d % 6 != 0) throw ValidationError("dimension must be multiple of 6");
    if (base <= 1.0) throw ValidationError("encoding base must exceed 1");
  }
};

/// theta_k = base^{-6(k-1)/d}, k = 1..d/6. Strictly decreasing, starts at 1.
std::vector<double> theta_frequencies(const EncodingConfig& config);

/// Per-point cos/sin tables laid out to match the 6x6 block structure:
/// entries 6k..6k+5 hold cos/sin of (x*theta_k, x*theta_k, y*theta_k, y*theta_k,
/// z*theta_k, z*theta_k). Immutable after construction.
struct PositionCode {
  Eigen::VectorXd cos_t;
  Eigen::VectorXd sin_t;
};

PositionCode position_code(const Vec3& p, const EncodingConfig& config);

/// Sparse application of the block-diagonal rotation to a feature vector.
Eigen::VectorXd encode(const PositionCode& code, const Eigen::VectorXd& x);
Eigen::VectorXd encode(const Vec3& p, const Eigen::VectorXd& x,
                       const EncodingConfig& config);

/// Encode every row of an n x d feature matrix with its own position (parallel).
Eigen::MatrixXd encode_rows(const Eigen::MatrixXd& features, const PointCloud& positions,
                            const EncodingConfig& config);

/// Serial reference for encode_rows, kept for tests and benchmarks.
Eigen::MatrixXd encode_rows_serial(const Eigen::MatrixXd& features,
                                   const PointCloud& positions,
                                   const EncodingConfig& config);

/// Dense d x d block-diagonal rotation matrix; reference/oracle path only.
Eigen::MatrixXd dense_theta(const Vec3& p, const EncodingConfig& config);

/// <encode(p_i,x_i), encode(p_j,x_j)>; equals x_i^T Theta(p_j - p_i) x_j.
double relative_dot(const Eigen::VectorXd& x_i, const Vec3& p_i,
                    const Eigen::VectorXd& x_j, const Vec3& p_j,
                    const EncodingConfig& config);

}  // namespace pcm
