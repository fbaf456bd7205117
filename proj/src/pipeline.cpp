#include "pcm/pipeline.hpp"

#include "pcm/geometry.hpp"

#include <cmath>
#include <iostream>
#include <random>

namespace pcm {

PipelineWeights PipelineWeights::zero(int d) {
  PipelineWeights w;
  for (int l = 0; l < kPipelineLayers; ++l) {
    w.tmp[l] = TransformerWeights::zero(d);
    w.W_S[l] = Eigen::MatrixXd::Identity(d, d);
    w.W_T[l] = Eigen::MatrixXd::Identity(d, d);
  }
  return w;
}

PipelineWeights PipelineWeights::random(int d, std::uint64_t seed) {
  PipelineWeights w;
  for (int l = 0; l < kPipelineLayers; ++l) {
    w.tmp[l] = TransformerWeights::random(d, seed + 17 * l);
    std::mt19937_64 rng(seed + 1000 + l);
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(d), 1.0 / std::sqrt(d));
    w.W_S[l].resize(d, d);
    w.W_T[l].resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) w.W_S[l](i, j) = dist(rng);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) w.W_T[l](i, j) = dist(rng);
  }
  return w;
}

PipelineOutput run_pipeline(const PointCloud& S_hat, const PointCloud& T_hat,
                            const Eigen::MatrixXd& featS, const Eigen::MatrixXd& featT,
                            const PipelineWeights& weights, const MatchConfig& match_config,
                            const EncodingConfig& encoding_config,
                            const std::optional<PipelineGroundTruth>& gt) {
  encoding_config.validate();
  match_config.validate();
  if (S_hat.empty() || T_hat.empty()) throw ValidationError("empty input cloud");

  PipelineOutput out;
  PointCloud posS = S_hat;
  Eigen::MatrixXd fS = featS, fT = featT;
  std::array<double, kPipelineLayers> lm{}, lw{};
  std::optional<OverlapResult> overlap;
  if (gt) overlap = overlap_set(S_hat, T_hat, gt->warp, gt->sigma);

  for (int layer = 0; layer < kPipelineLayers; ++layer) {
    auto [s_out, t_out] = transformer_block(fS, posS, fT, T_hat, weights.tmp[layer],
                                            encoding_config);
    fS = s_out;
    fT = t_out;
    Eigen::MatrixXd score = score_matrix(fS, posS, fT, T_hat, weights.W_S[layer],
                                         weights.W_T[layer], encoding_config);
    out.confidence[layer] = dual_softmax(score);
    out.layer_matches[layer] = select_matches(out.confidence[layer], match_config);

    CorrespondenceSet soft =
        top_soft_matches(out.confidence[layer], static_cast<int>(S_hat.size()));
    RigidTransform fit;
    bool degenerate = false;
    try {
      // Fit is expressed on the original source coordinates, composing any
      // earlier repositioning.
      fit = soft_procrustes(soft, posS, T_hat);
    } catch (const NumericalError&) {
      degenerate = true;
    }
    if (degenerate) {
      out.transform[layer] = layer == 0 ? RigidTransform::identity() : out.transform[layer - 1];
      if (layer == 0) {
        out.reposition_skipped = true;
        std::cerr << "[pcm] warning: degenerate layer-1 fit, repositioning skipped\n";
      }
    } else {
      RigidTransform composed;
      if (layer == 0) {
        composed = fit;
      } else {
        composed.R = fit.R * out.transform[0].R;
        composed.t = fit.R * out.transform[0].t + fit.t;
      }
      out.transform[layer] = composed;
      if (layer == 0) posS = reposition(posS, fit);
    }

    if (gt) {
      lm[layer] = matching_loss(out.confidence[layer], gt->k_gt, gt->loss);
      lw[layer] = warping_loss(S_hat, out.transform[layer], gt->warp, overlap->ids);
    }
  }

  out.final_matches = out.layer_matches[kPipelineLayers - 1];
  if (gt) {
    out.matching_losses = lm;
    out.warping_losses = lw;
  }
  return out;
}

double total_loss(const PipelineOutput& output, double lambda_w) {
  if (!output.matching_losses || !output.warping_losses)
    throw ValidationError("pipeline was run without ground truth");
  double lm = 0.0, lw = 0.0;
  for (int l = 0; l < kPipelineLayers; ++l) {
    lm += (*output.matching_losses)[l];
    lw += (*output.warping_losses)[l];
  }
  return lm + lambda_w * lw;
}

}  // namespace pcm
