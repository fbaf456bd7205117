// Command-line harness: synthetic pair generation, subsampling, matching,
// rigid/non-rigid registration, metric evaluation, and the self-test suite.

#include "pcm/geometry.hpp"
#include "pcm/io.hpp"
#include "pcm/metrics.hpp"
#include "pcm/nicp.hpp"
#include "pcm/pipeline.hpp"
#include "pcm/synth.hpp"

#include "acceptance_suite.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pcm;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
};

RunConfig load_config(const GlobalOpts& g, const std::string& mode_hint) {
  RunConfig cfg = g.config_path.empty() ? RunConfig::defaults(mode_hint)
                                        : RunConfig::from_json(read_text_file(g.config_path));
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

json transform_json(const RigidTransform& tf) {
  json j;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) j["R"].push_back(tf.R(r, c));
  for (int i = 0; i < 3; ++i) j["t"].push_back(tf.t[i]);
  return j;
}

RigidTransform transform_from(const json& j) {
  return transform_from_json(j.dump());
}

json pairs_json(const CorrespondenceSet& k) {
  json arr = json::array();
  for (const auto& m : k) arr.push_back({m.src, m.tgt, m.confidence});
  return arr;
}

CorrespondenceSet pairs_from(const json& arr) {
  CorrespondenceSet k;
  for (const auto& e : arr) {
    Correspondence m;
    m.src = e.at(0).get<int>();
    m.tgt = e.at(1).get<int>();
    m.confidence = e.size() > 2 ? e.at(2).get<double>() : 1.0;
    k.push_back(m);
  }
  return k;
}

json load_json_file(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ValidationError("invalid JSON in " + path);
  return j;
}

/// GT file: {"kind": "rigid"|"bend"|"twist"|"wave", "transform": {...} (rigid),
/// "magnitude": m (deformable), "pairs": [[i,j,conf]...],
/// "displacements": [[dx,dy,dz]...] (deformable, indexed by source id)}.
struct GroundTruthFile {
  std::string kind;
  std::optional<RigidTransform> transform;
  CorrespondenceSet pairs;
  std::vector<Vec3> displacements;

  WarpFunction warp() const {
    if (transform) return WarpFunction::rigid(*transform);
    if (!displacements.empty()) return WarpFunction::tabulated(displacements);
    throw ValidationError("ground truth file has neither a transform nor displacements");
  }

  static GroundTruthFile load(const std::string& path) {
    json j = load_json_file(path);
    GroundTruthFile gt;
    gt.kind = j.value("kind", "rigid");
    if (j.contains("transform")) gt.transform = transform_from(j["transform"]);
    if (j.contains("pairs")) gt.pairs = pairs_from(j["pairs"]);
    if (j.contains("displacements"))
      for (const auto& d : j["displacements"])
        gt.displacements.emplace_back(d.at(0).get<double>(), d.at(1).get<double>(),
                                      d.at(2).get<double>());
    return gt;
  }
};

int cmd_config(const GlobalOpts& g, const std::string& mode) {
  RunConfig cfg = load_config(g, mode);
  std::cout << cfg.to_json() << "\n";
  return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& mode, int points, double overlap,
              double noise, const std::string& warp, double magnitude) {
  RunConfig cfg = load_config(g, mode);
  json gt;
  if (mode == "rigid") {
    RigidPair pair = synth_rigid_pair(cfg.seed, points, overlap, noise);
    write_ply(out_path(g, "source.ply"), pair.S);
    write_ply(out_path(g, "target.ply"), pair.T);
    gt["kind"] = "rigid";
    gt["transform"] = transform_json(pair.gt);
    gt["pairs"] = pairs_json(pair.k_gt);
  } else if (mode == "deformable") {
    DeformablePair pair =
        synth_deformable_pair(cfg.seed, points, warp_kind_from_string(warp), magnitude);
    write_ply(out_path(g, "source.ply"), pair.S);
    write_ply(out_path(g, "target.ply"), pair.T);
    gt["kind"] = warp;
    gt["magnitude"] = magnitude;
    gt["pairs"] = pairs_json(pair.k_gt);
    json disp = json::array();
    for (size_t i = 0; i < pair.S.size(); ++i) {
      Vec3 d = pair.gt(pair.S[i]) - pair.S[i];
      disp.push_back({d.x(), d.y(), d.z()});
    }
    gt["displacements"] = disp;
  } else {
    throw ValidationError("mode must be 'rigid' or 'deformable'");
  }
  write_text_file(out_path(g, "gt.json"), gt.dump(2) + "\n");
  return 0;
}

int cmd_subsample(const GlobalOpts& g, const std::string& input, const std::string& output,
                  double voxel) {
  PointCloud cloud = read_ply(input);
  auto r = grid_subsample(cloud, voxel);
  fs::path out(output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_ply(output, r.cloud);
  std::cout << "{\"input_points\": " << cloud.size()
            << ", \"output_points\": " << r.cloud.size() << "}\n";
  return 0;
}

int cmd_match(const GlobalOpts& g, const std::string& source, const std::string& target,
              const std::string& feat_s, const std::string& feat_t,
              const std::string& weights_path, const std::string& mode) {
  RunConfig cfg = load_config(g, mode);
  PointCloud S = read_ply(source), T = read_ply(target);

  int d = cfg.feature_dim;
  Eigen::MatrixXd fs_mat, ft_mat;
  if (!feat_s.empty() != !feat_t.empty())
    throw ValidationError("provide feature files for both clouds or neither");
  if (!feat_s.empty()) {
    fs_mat = read_matrix(feat_s);
    ft_mat = read_matrix(feat_t);
    if (fs_mat.rows() != static_cast<int>(S.size()) ||
        ft_mat.rows() != static_cast<int>(T.size()))
      throw ValidationError("feature row count does not match cloud size");
    if (fs_mat.cols() != ft_mat.cols()) throw ValidationError("feature dims differ");
    d = static_cast<int>(fs_mat.cols());
  } else {
    // No backbone available: fall back to coordinate descriptors (useful for
    // synthetic pairs whose clouds are already roughly aligned).
    d = std::min(d, 48);
    if (d % 6 != 0) d = 48;
    fs_mat = coordinate_features(S, d, cfg.seed);
    ft_mat = coordinate_features(T, d, cfg.seed);
  }

  PipelineWeights w =
      weights_path.empty() ? PipelineWeights::zero(d) : read_weights(weights_path);
  MatchConfig mc{.theta_c = cfg.confidence_threshold, .use_mnn = cfg.apply_mnn};
  EncodingConfig enc{.d = d, .base = cfg.encoding_base};
  enc.validate();
  mc.validate();

  auto out = run_pipeline(S, T, fs_mat, ft_mat, w, mc, enc);
  write_text_file(out_path(g, "matches.json"),
                  correspondences_to_json(out.final_matches) + "\n");
  json layers;
  for (int l = 0; l < kPipelineLayers; ++l)
    layers.push_back(transform_json(out.transform[l]));
  json report{{"matches", static_cast<int>(out.final_matches.size())},
              {"layer_transforms", layers},
              {"reposition_skipped", out.reposition_skipped}};
  write_text_file(out_path(g, "match_report.json"), report.dump(2) + "\n");
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_register_rigid(const GlobalOpts& g, const std::string& source,
                       const std::string& target, const std::string& matches_path,
                       const std::string& mode) {
  RunConfig cfg = load_config(g, mode);
  PointCloud S = read_ply(source), T = read_ply(target);
  CorrespondenceSet k = correspondences_from_json(read_text_file(matches_path));
  RigidTransform tf = ransac_rigid(k, S, T, cfg.ransac_iterations, cfg.ransac_inlier_sigma,
                                   cfg.seed);
  write_text_file(out_path(g, "transform.json"), transform_to_json(tf) + "\n");
  std::cout << transform_to_json(tf) << "\n";
  return 0;
}

int cmd_register_nonrigid(const GlobalOpts& g, const std::string& source,
                          const std::string& target, const std::string& matches_path,
                          const std::string& mode) {
  RunConfig cfg = load_config(g, mode);
  PointCloud S = read_ply(source), T = read_ply(target);
  CorrespondenceSet k = correspondences_from_json(read_text_file(matches_path));

  GraphBuildConfig gb;
  gb.node_spacing = cfg.node_spacing;
  gb.edge_k = cfg.edge_k;
  gb.skin_k = cfg.skin_k;
  gb.gamma_skin = cfg.gamma_skin;
  gb.min_component_nodes = cfg.min_component_nodes;
  DeformationGraph graph = build_graph(S, gb);
  if (graph.nodes.empty())
    throw NumericalError("deformation graph is empty after component filtering");

  std::vector<NicpMatch> matches;
  for (const auto& m : k) {
    if (m.src < 0 || m.src >= static_cast<int>(S.size()) || m.tgt < 0 ||
        m.tgt >= static_cast<int>(T.size()))
      throw ValidationError("match index out of range");
    matches.push_back({S[m.src], T[m.tgt], m.confidence});
  }
  NicpConfig nc;
  nc.lambda_c = cfg.lambda_c;
  nc.lambda_a = cfg.lambda_a;
  nc.max_iters = cfg.nicp_max_iters;
  nc.validate();

  auto result = gauss_newton_solve(graph, GraphState::identity(
                                              static_cast<int>(graph.nodes.size())),
                                   matches, nc);
  write_ply(out_path(g, "warped.ply"), warp_cloud(S, graph, result.state));
  write_text_file(out_path(g, "trace.jsonl"), result.trace_json());
  write_text_file(out_path(g, "graph.json"), graph.to_json() + "\n");
  std::cout << "{\"iterations\": " << result.trace.size()
            << ", \"final_energy\": " << result.trace.back().energy << "}\n";
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& source, const std::string& target,
             const std::string& gt_path, const std::string& matches_path,
             const std::string& transform_path, const std::string& warped_path,
             const std::string& mode) {
  RunConfig cfg = load_config(g, mode);
  PointCloud S = read_ply(source), T = read_ply(target);
  GroundTruthFile gt = GroundTruthFile::load(gt_path);

  json report;
  report["mode"] = cfg.mode;

  std::vector<std::pair<Vec3, Vec3>> gt_points;
  for (const auto& m : gt.pairs) gt_points.emplace_back(S[m.src], T[m.tgt]);

  if (!matches_path.empty()) {
    CorrespondenceSet k = correspondences_from_json(read_text_file(matches_path));
    std::vector<std::pair<Vec3, Vec3>> pred;
    for (const auto& m : k) pred.emplace_back(S[m.src], T[m.tgt]);
    WarpFunction warp = gt.warp();
    double ir;
    if (warp.kind() == WarpFunction::Kind::Tabulated) {
      // evaluate the tabulated warp by source id
      int inliers = 0;
      for (const auto& m : k)
        if ((warp.at(m.src, S[m.src]) - T[m.tgt]).norm() < cfg.inlier_sigma) ++inliers;
      ir = k.empty() ? 0.0 : static_cast<double>(inliers) / k.size();
    } else {
      ir = inlier_ratio(pred, warp, cfg.inlier_sigma);
    }
    report["inlier_ratio"] = ir;
    report["fmr_pass"] = ir > cfg.fmr_ir_threshold;
    if (!gt_points.empty()) report["nfmr"] = nfmr(pred, gt_points, cfg.inlier_sigma, 3);
  }

  if (!transform_path.empty()) {
    RigidTransform tf = transform_from_json(read_text_file(transform_path));
    if (gt_points.empty()) throw ValidationError("registration eval needs GT pairs");
    double se = 0;
    for (const auto& [p, q] : gt_points) se += (tf.apply(p) - q).squaredNorm();
    double rmse = std::sqrt(se / gt_points.size());
    report["rmse"] = rmse;
    report["rr_pass"] = rmse < cfg.rr_rmse_threshold;
  }

  if (!warped_path.empty()) {
    PointCloud warped = read_ply(warped_path);
    if (warped.size() != S.size())
      throw ValidationError("warped cloud size does not match source");
    WarpFunction warp = gt.warp();
    std::vector<Vec3> pred_flow, gt_flow;
    for (size_t i = 0; i < S.size(); ++i) {
      pred_flow.push_back(warped[i] - S[i]);
      gt_flow.push_back(warp.at(static_cast<int>(i), S[i]) - S[i]);
    }
    auto fm = flow_metrics(pred_flow, gt_flow);
    report["epe"] = fm.epe;
    report["acc5"] = fm.acc5;
    report["acc10"] = fm.acc10;
  }

  std::string text = report.dump(2) + "\n";
  write_text_file(out_path(g, "report.json"), text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partial point cloud matching toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON run configuration file");
  app.add_option("--seed", g.seed, "random seed (overrides config)")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--jobs", g.jobs, "worker thread count (0 = default)");

  std::string mode = "rigid";
  int points = 1000;
  double overlap = 0.75, noise = 0.0, magnitude = 0.5, voxel = 0.025;
  std::string warp = "bend";
  std::string source, target, input, output, feat_s, feat_t, weights_path;
  std::string matches_path, transform_path, gt_path, warped_path;

  auto* config_cmd = app.add_subcommand("config", "print the effective configuration");
  config_cmd->add_option("--mode", mode, "rigid or deformable");

  auto* synth = app.add_subcommand("synth", "generate a synthetic pair");
  synth->add_option("--mode", mode, "rigid or deformable");
  synth->add_option("--points", points, "point count");
  synth->add_option("--overlap", overlap, "overlap fraction (rigid)");
  synth->add_option("--noise", noise, "noise sigma in meters (rigid)");
  synth->add_option("--warp", warp, "bend, twist or wave (deformable)");
  synth->add_option("--magnitude", magnitude, "warp magnitude (deformable)");

  auto* subsample = app.add_subcommand("subsample", "voxel-grid subsample a PLY file");
  subsample->add_option("--input", input, "input PLY")->required();
  subsample->add_option("--output", output, "output PLY")->required();
  subsample->add_option("--voxel", voxel, "voxel edge length in meters");

  auto* match = app.add_subcommand("match", "run the two-pass matcher");
  match->add_option("--source", source, "source PLY")->required();
  match->add_option("--target", target, "target PLY")->required();
  match->add_option("--source-features", feat_s, "source feature matrix file");
  match->add_option("--target-features", feat_t, "target feature matrix file");
  match->add_option("--weights", weights_path, "weights bundle file");
  match->add_option("--mode", mode, "rigid or deformable");

  auto* reg_r = app.add_subcommand("register-rigid", "RANSAC rigid registration");
  reg_r->add_option("--source", source, "source PLY")->required();
  reg_r->add_option("--target", target, "target PLY")->required();
  reg_r->add_option("--matches", matches_path, "correspondence JSON")->required();
  reg_r->add_option("--mode", mode, "rigid or deformable");

  auto* reg_n = app.add_subcommand("register-nonrigid", "deformation-graph registration");
  reg_n->add_option("--source", source, "source PLY")->required();
  reg_n->add_option("--target", target, "target PLY")->required();
  reg_n->add_option("--matches", matches_path, "correspondence JSON")->required();
  reg_n->add_option("--mode", mode, "rigid or deformable");

  auto* eval = app.add_subcommand("eval", "evaluate matches / transforms / warps");
  eval->add_option("--source", source, "source PLY")->required();
  eval->add_option("--target", target, "target PLY")->required();
  eval->add_option("--gt", gt_path, "ground truth JSON")->required();
  eval->add_option("--matches", matches_path, "correspondence JSON");
  eval->add_option("--transform", transform_path, "rigid transform JSON");
  eval->add_option("--warped", warped_path, "warped source PLY");
  eval->add_option("--mode", mode, "rigid or deformable");

  auto* selftest = app.add_subcommand("selftest", "run the acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (g.jobs > 0) omp_set_num_threads(g.jobs);
#endif

  try {
    if (config_cmd->parsed()) return cmd_config(g, mode);
    if (synth->parsed()) return cmd_synth(g, mode, points, overlap, noise, warp, magnitude);
    if (subsample->parsed()) return cmd_subsample(g, input, output, voxel);
    if (match->parsed()) return cmd_match(g, source, target, feat_s, feat_t, weights_path, mode);
    if (reg_r->parsed()) return cmd_register_rigid(g, source, target, matches_path, mode);
    if (reg_n->parsed()) return cmd_register_nonrigid(g, source, target, matches_path, mode);
    if (eval->parsed())
      return cmd_eval(g, source, target, gt_path, matches_path, transform_path, warped_path,
                      mode);
    if (selftest->parsed()) return run_acceptance_suite() == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
