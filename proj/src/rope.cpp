#include "pcm/rope.hpp"

#include <cmath>

namespace pcm {

std::vector<double> theta_frequencies(const EncodingConfig& config) {
  config.validate();
  int nblocks = config.d / 6;
  std::vector<double> theta(nblocks);
  for (int k = 1; k <= nblocks; ++k)
    theta[k - 1] = std::pow(config.base, -6.0 * (k - 1) / config.d);
  return theta;
}

PositionCode position_code(const Vec3& p, const EncodingConfig& config) {
  auto theta = theta_frequencies(config);
  PositionCode code;
  code.cos_t.resize(config.d);
  code.sin_t.resize(config.d);
  for (int k = 0; k < config.d / 6; ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      double angle = p[axis] * theta[k];
      double c = std::cos(angle), s = std::sin(angle);
      int at = 6 * k + 2 * axis;
      code.cos_t[at] = c;
      code.cos_t[at + 1] = c;
      code.sin_t[at] = s;
      code.sin_t[at + 1] = s;
    }
  }
  return code;
}

Eigen::VectorXd encode(const PositionCode& code, const Eigen::VectorXd& x) {
  if (x.size() != code.cos_t.size()) throw ValidationError("feature dimension mismatch");
  Eigen::VectorXd out(x.size());
  for (int m = 0; m < x.size(); m += 2) {
    out[m] = x[m] * code.cos_t[m] - x[m + 1] * code.sin_t[m];
    out[m + 1] = x[m + 1] * code.cos_t[m + 1] + x[m] * code.sin_t[m + 1];
  }
  return out;
}

Eigen::VectorXd encode(const Vec3& p, const Eigen::VectorXd& x,
                       const EncodingConfig& config) {
  if (x.size() != config.d) throw ValidationError("feature dimension mismatch");
  return encode(position_code(p, config), x);
}

Eigen::MatrixXd encode_rows(const Eigen::MatrixXd& features, const PointCloud& positions,
                            const EncodingConfig& config) {
  if (features.rows() != static_cast<Eigen::Index>(positions.size()))
    throw ValidationError("row count mismatch between features and positions");
  if (features.cols() != config.d) throw ValidationError("feature dimension mismatch");
  Eigen::MatrixXd out(features.rows(), features.cols());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(features.rows()); ++i) {
    PositionCode code = position_code(positions[i], config);
    out.row(i) = encode(code, features.row(i).transpose()).transpose();
  }
  return out;
}

Eigen::MatrixXd encode_rows_serial(const Eigen::MatrixXd& features,
                                   const PointCloud& positions,
                                   const EncodingConfig& config) {
  if (features.rows() != static_cast<Eigen::Index>(positions.size()))
    throw ValidationError("row count mismatch between features and positions");
  Eigen::MatrixXd out(features.rows(), features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out.row(i) = encode(positions[i], features.row(i).transpose(), config).transpose();
  return out;
}

Eigen::MatrixXd dense_theta(const Vec3& p, const EncodingConfig& config) {
  auto theta = theta_frequencies(config);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(config.d, config.d);
  for (int k = 0; k < config.d / 6; ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      double angle = p[axis] * theta[k];
      double c = std::cos(angle), s = std::sin(angle);
      int at = 6 * k + 2 * axis;
      M(at, at) = c;
      M(at, at + 1) = -s;
      M(at + 1, at) = s;
      M(at + 1, at + 1) = c;
    }
  }
  return M;
}

double relative_dot(const Eigen::VectorXd& x_i, const Vec3& p_i,
                    const Eigen::VectorXd& x_j, const Vec3& p_j,
                    const EncodingConfig& config) {
  if (x_i.size() != config.d || x_j.size() != config.d)
    throw ValidationError("feature dimension mismatch");
  return encode(p_i, x_i, config).dot(encode(p_j, x_j, config));
}

}  // namespace pcm
