#include "pcm/attention.hpp"

#include <cmath>
#include <iostream>
#include <random>

namespace pcm {

namespace {

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

Eigen::MatrixXd uniform_matrix(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace

Eigen::VectorXd Mlp::apply(const Eigen::VectorXd& in) const {
  if (in.size() != w1.cols()) throw ValidationError("mlp input size mismatch");
  Eigen::VectorXd h1 = (w1 * in + b1).unaryExpr([](double v) { return gelu(v); });
  Eigen::VectorXd h2 = (w2 * h1 + b2).unaryExpr([](double v) { return gelu(v); });
  return w3 * h2 + b3;
}

Mlp Mlp::zero(int d) {
  Mlp m;
  m.w1 = Eigen::MatrixXd::Zero(d, 2 * d);
  m.w2 = Eigen::MatrixXd::Zero(d, d);
  m.w3 = Eigen::MatrixXd::Zero(d, d);
  m.b1 = Eigen::VectorXd::Zero(d);
  m.b2 = Eigen::VectorXd::Zero(d);
  m.b3 = Eigen::VectorXd::Zero(d);
  return m;
}

AttentionWeights AttentionWeights::zero(int d) {
  AttentionWeights w;
  w.W_q = Eigen::MatrixXd::Zero(d, d);
  w.W_k = Eigen::MatrixXd::Zero(d, d);
  w.W_v = Eigen::MatrixXd::Zero(d, d);
  w.mlp = Mlp::zero(d);
  return w;
}

AttentionWeights AttentionWeights::random(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double bound = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionWeights w;
  w.W_q = uniform_matrix(d, d, bound, rng);
  w.W_k = uniform_matrix(d, d, bound, rng);
  w.W_v = uniform_matrix(d, d, bound, rng);
  w.mlp.w1 = uniform_matrix(d, 2 * d, bound, rng);
  w.mlp.w2 = uniform_matrix(d, d, bound, rng);
  w.mlp.w3 = uniform_matrix(d, d, bound, rng);
  w.mlp.b1 = Eigen::VectorXd::Zero(d);
  w.mlp.b2 = Eigen::VectorXd::Zero(d);
  w.mlp.b3 = Eigen::VectorXd::Zero(d);
  return w;
}

TransformerWeights TransformerWeights::zero(int d) {
  return {AttentionWeights::zero(d), AttentionWeights::zero(d)};
}

TransformerWeights TransformerWeights::random(int d, std::uint64_t seed) {
  return {AttentionWeights::random(d, seed), AttentionWeights::random(d, seed ^ 0x9e3779b97f4a7c15ull)};
}

namespace {

Eigen::MatrixXd attention_core(const Eigen::MatrixXd& features_q, const PointCloud& positions_q,
                               const Eigen::MatrixXd& features_kv, const PointCloud& positions_kv,
                               const AttentionWeights& weights, const EncodingConfig& config) {
  config.validate();
  const int d = config.d;
  if (features_q.cols() != d || features_kv.cols() != d)
    throw ValidationError("feature dimension mismatch");
  if (features_q.rows() != static_cast<Eigen::Index>(positions_q.size()) ||
      features_kv.rows() != static_cast<Eigen::Index>(positions_kv.size()))
    throw ValidationError("row count mismatch between features and positions");

  // q and k carry position codes, v does not.
  Eigen::MatrixXd Q = encode_rows(features_q * weights.W_q.transpose(), positions_q, config);
  Eigen::MatrixXd K = encode_rows(features_kv * weights.W_k.transpose(), positions_kv, config);
  Eigen::MatrixXd V = features_kv * weights.W_v.transpose();

  Eigen::MatrixXd A = Q * K.transpose() / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd out(features_q.rows(), d);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(A.rows()); ++i) {
    double mx = A.row(i).maxCoeff();
    Eigen::VectorXd a = (A.row(i).array() - mx).exp();
    a /= a.sum();
    Eigen::VectorXd message = V.transpose() * a;
    Eigen::VectorXd cat(2 * d);
    cat << Q.row(i).transpose(), message;
    out.row(i) = features_q.row(i) + weights.mlp.apply(cat).transpose();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd self_attention(const Eigen::MatrixXd& features, const PointCloud& positions,
                               const AttentionWeights& weights, const EncodingConfig& config) {
  return attention_core(features, positions, features, positions, weights, config);
}

Eigen::MatrixXd cross_attention(const Eigen::MatrixXd& features_q, const PointCloud& positions_q,
                                const Eigen::MatrixXd& features_kv, const PointCloud& positions_kv,
                                const AttentionWeights& weights, const EncodingConfig& config) {
  return attention_core(features_q, positions_q, features_kv, positions_kv, weights, config);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> transformer_block(
    const Eigen::MatrixXd& featS, const PointCloud& posS, const Eigen::MatrixXd& featT,
    const PointCloud& posT, const TransformerWeights& weights, const EncodingConfig& config) {
  Eigen::MatrixXd s1 = self_attention(featS, posS, weights.self, config);
  Eigen::MatrixXd t1 = self_attention(featT, posT, weights.self, config);
  Eigen::MatrixXd s2 = cross_attention(s1, posS, t1, posT, weights.cross, config);
  Eigen::MatrixXd t2 = cross_attention(t1, posT, s1, posS, weights.cross, config);
  return {s2, t2};
}

double matching_loss(const Eigen::MatrixXd& C, const CorrespondenceSet& K_gt,
                     const LossConfig& config) {
  config.validate();
  if (K_gt.empty()) throw ValidationError("empty ground-truth match set");
  double loss = 0.0;
  int clamped = 0;
  for (const auto& m : K_gt) {
    if (m.src < 0 || m.src >= C.rows() || m.tgt < 0 || m.tgt >= C.cols())
      throw ValidationError("ground-truth pair out of range");
    double c = C(m.src, m.tgt);
    if (c <= 0.0) {
      c = 1e-12;
      ++clamped;
    }
    loss += config.alpha * std::pow(1.0 - c, config.gamma_focal) * (-std::log(c));
  }
  if (clamped > 0)
    std::cerr << "[pcm] warning: clamped " << clamped << " zero confidences in matching_loss\n";
  return loss / static_cast<double>(K_gt.size());
}

double warping_loss(const PointCloud& S_hat, const RigidTransform& transform,
                    const WarpFunction& warp_gt, const std::vector<int>& overlap_ids) {
  if (overlap_ids.empty()) {
    std::cerr << "[pcm] warning: empty overlap set in warping_loss\n";
    return 0.0;
  }
  double loss = 0.0;
  for (int id : overlap_ids) {
    if (id < 0 || id >= static_cast<int>(S_hat.size()))
      throw ValidationError("overlap id out of range");
    loss += (warp_gt.at(id, S_hat[id]) - transform.apply(S_hat[id])).lpNorm<1>();
  }
  return loss / static_cast<double>(overlap_ids.size());
}

}  // namespace pcm
