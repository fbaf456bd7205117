#include "pcm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace pcm {

Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& featS, const PointCloud& posS,
                             const Eigen::MatrixXd& featT, const PointCloud& posT,
                             const Eigen::MatrixXd& W_S, const Eigen::MatrixXd& W_T,
                             const EncodingConfig& config) {
  config.validate();
  if (featS.cols() != config.d || featT.cols() != config.d)
    throw ValidationError("feature dimension mismatch");
  if (W_S.rows() != config.d || W_S.cols() != config.d || W_T.rows() != config.d ||
      W_T.cols() != config.d)
    throw ValidationError("projection matrix must be d x d");
  Eigen::MatrixXd U = encode_rows(featS * W_S.transpose(), posS, config);
  Eigen::MatrixXd V = encode_rows(featT * W_T.transpose(), posT, config);
  return U * V.transpose() / std::sqrt(static_cast<double>(config.d));
}

namespace {

void softmax_rows_inplace(Eigen::MatrixXd& M) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(M.rows()); ++i) {
    double mx = M.row(i).maxCoeff();
    M.row(i) = (M.row(i).array() - mx).exp();
    M.row(i) /= M.row(i).sum();
  }
}

}  // namespace

Eigen::MatrixXd dual_softmax(const Eigen::MatrixXd& S) {
  if (!S.allFinite()) throw ValidationError("score matrix has non-finite entries");
  Eigen::MatrixXd rows = S;
  softmax_rows_inplace(rows);
  Eigen::MatrixXd cols = S.transpose();
  softmax_rows_inplace(cols);
  return rows.cwiseProduct(cols.transpose());
}

Eigen::MatrixXd dual_softmax_serial(const Eigen::MatrixXd& S) {
  Eigen::MatrixXd C(S.rows(), S.cols());
  Eigen::VectorXd rmax(S.rows()), rsum(S.rows()), cmax(S.cols()), csum(S.cols());
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    rmax[i] = S.row(i).maxCoeff();
    rsum[i] = (S.row(i).array() - rmax[i]).exp().sum();
  }
  for (Eigen::Index j = 0; j < S.cols(); ++j) {
    cmax[j] = S.col(j).maxCoeff();
    csum[j] = (S.col(j).array() - cmax[j]).exp().sum();
  }
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    for (Eigen::Index j = 0; j < S.cols(); ++j)
      C(i, j) = std::exp(S(i, j) - rmax[i]) / rsum[i] * std::exp(S(i, j) - cmax[j]) / csum[j];
  return C;
}

CorrespondenceSet select_matches(const Eigen::MatrixXd& C, const MatchConfig& config) {
  config.validate();
  CorrespondenceSet out;
  std::vector<int> row_argmax(C.rows()), col_argmax(C.cols());
  if (config.use_mnn) {
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
      Eigen::Index j;
      C.row(i).maxCoeff(&j);  // first occurrence on ties
      row_argmax[i] = static_cast<int>(j);
    }
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      Eigen::Index i;
      C.col(j).maxCoeff(&i);
      col_argmax[j] = static_cast<int>(i);
    }
  }
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      if (C(i, j) <= config.theta_c) continue;
      if (config.use_mnn &&
          (row_argmax[i] != static_cast<int>(j) || col_argmax[j] != static_cast<int>(i)))
        continue;
      out.push_back({static_cast<int>(i), static_cast<int>(j), C(i, j)});
    }
  }
  return out;
}

CorrespondenceSet top_soft_matches(const Eigen::MatrixXd& C, int n_hat) {
  if (n_hat < 1) throw ValidationError("n_hat must be at least 1");
  const long long total = static_cast<long long>(C.rows()) * C.cols();
  n_hat = static_cast<int>(std::min<long long>(n_hat, total));
  std::vector<long long> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  auto conf = [&](long long flat) {
    return C(flat / C.cols(), flat % C.cols());
  };
  std::partial_sort(idx.begin(), idx.begin() + n_hat, idx.end(),
                    [&](long long a, long long b) {
                      double ca = conf(a), cb = conf(b);
                      if (ca != cb) return ca > cb;
                      return a < b;  // ties: row-major first
                    });
  CorrespondenceSet out;
  out.reserve(n_hat);
  double sum = 0.0;
  for (int k = 0; k < n_hat; ++k) {
    long long f = idx[k];
    double c = conf(f);
    out.push_back({static_cast<int>(f / C.cols()), static_cast<int>(f % C.cols()), c});
    sum += c;
  }
  if (sum <= 0.0) {
    std::cerr << "[pcm] warning: all-zero confidence in top_soft_matches, uniform weights\n";
    for (auto& m : out) m.confidence = 1.0 / n_hat;
  } else {
    for (auto& m : out) m.confidence /= sum;
  }
  return out;
}

}  // namespace pcm
