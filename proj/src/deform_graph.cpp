#include "pcm/deform_graph.hpp"

#include "pcm/geometry.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace pcm {

GraphState GraphState::identity(int n_nodes) {
  GraphState s;
  s.R.assign(n_nodes, Mat3::Identity());
  s.t.assign(n_nodes, Vec3::Zero());
  return s;
}

std::string DeformationGraph::to_json() const {
  nlohmann::json j;
  for (const auto& n : nodes) j["nodes"].push_back({n.x(), n.y(), n.z()});
  for (const auto& e : edges) j["edges"].push_back({e.first, e.second});
  j["gamma_skin"] = gamma_skin;
  j["skin_k"] = skin_k;
  return j.dump(2);
}

DeformationGraph DeformationGraph::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ValidationError("invalid JSON for deformation graph");
  DeformationGraph g;
  for (const auto& n : j.at("nodes")) g.nodes.emplace_back(n[0], n[1], n[2]);
  if (j.contains("edges"))
    for (const auto& e : j["edges"]) g.edges.emplace_back(e[0], e[1]);
  g.gamma_skin = j.at("gamma_skin");
  g.skin_k = j.value("skin_k", 6);
  for (const auto& e : g.edges)
    if (e.first < 0 || e.second < 0 || e.first >= static_cast<int>(g.nodes.size()) ||
        e.second >= static_cast<int>(g.nodes.size()))
      throw ValidationError("graph edge endpoint out of range");
  return g;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

DeformationGraph build_graph(const PointCloud& cloud, const GraphBuildConfig& config) {
  if (cloud.empty()) throw ValidationError("cannot build graph from an empty cloud");
  if (config.node_spacing <= 0) throw ValidationError("node_spacing must be positive");
  if (config.edge_k < 1) throw ValidationError("edge_k must be at least 1");

  // Greedy radius sampling in input order; a coarse grid limits the candidate set.
  std::vector<Vec3> nodes;
  const double spacing2 = config.node_spacing * config.node_spacing;
  for (const auto& p : cloud) {
    bool covered = false;
    for (const auto& g : nodes) {
      if ((p - g).squaredNorm() < spacing2) {
        covered = true;
        break;
      }
    }
    if (!covered) nodes.push_back(p);
  }

  DeformationGraph graph;
  graph.gamma_skin = config.gamma_skin;
  graph.skin_k = config.skin_k;
  graph.nodes = nodes;

  std::set<std::pair<int, int>> edge_set;
  if (nodes.size() > 1) {
    KdTree tree(nodes);
    int k = std::min<int>(config.edge_k + 1, static_cast<int>(nodes.size()));
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      for (int j : tree.knearest(nodes[i], k)) {
        if (j == i) continue;
        edge_set.emplace(std::min(i, j), std::max(i, j));
      }
    }
  }
  graph.edges.assign(edge_set.begin(), edge_set.end());

  if (config.min_component_nodes > 0) {
    UnionFind uf(static_cast<int>(nodes.size()));
    for (const auto& e : graph.edges) uf.unite(e.first, e.second);
    std::vector<int> comp_size(nodes.size(), 0);
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) comp_size[uf.find(i)]++;
    std::vector<int> remap(nodes.size(), -1);
    std::vector<Vec3> kept;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      if (comp_size[uf.find(i)] >= config.min_component_nodes) {
        remap[i] = static_cast<int>(kept.size());
        kept.push_back(nodes[i]);
      }
    }
    std::vector<std::pair<int, int>> kept_edges;
    for (const auto& e : graph.edges)
      if (remap[e.first] >= 0 && remap[e.second] >= 0)
        kept_edges.emplace_back(remap[e.first], remap[e.second]);
    graph.nodes = std::move(kept);
    graph.edges = std::move(kept_edges);
  }
  return graph;
}

std::vector<SkinWeight> skinning_weights(const Vec3& p, const DeformationGraph& graph) {
  if (graph.nodes.empty()) throw ValidationError("graph has no nodes");
  const int n = static_cast<int>(graph.nodes.size());
  int k = graph.skin_k > 0 ? std::min(graph.skin_k, n) : n;

  std::vector<int> ids;
  if (k == n) {
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), 0);
  } else {
    std::vector<std::pair<double, int>> d(n);
    for (int i = 0; i < n; ++i) d[i] = {(graph.nodes[i] - p).squaredNorm(), i};
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int i = 0; i < k; ++i) ids.push_back(d[i].second);
  }

  const double inv2g2 = 1.0 / (2.0 * graph.gamma_skin * graph.gamma_skin);
  // Shift exponents so the closest node has weight 1 before normalization;
  // identical up to the normalization constant, immune to underflow.
  double min_d2 = std::numeric_limits<double>::infinity();
  for (int id : ids) min_d2 = std::min(min_d2, (graph.nodes[id] - p).squaredNorm());
  std::vector<SkinWeight> out;
  out.reserve(ids.size());
  double sum = 0.0;
  for (int id : ids) {
    double d2 = (graph.nodes[id] - p).squaredNorm();
    double w = std::exp(-(d2 - min_d2) * inv2g2);
    if (w > 0.0) {
      out.push_back({id, w});
      sum += w;
    }
  }
  for (auto& sw : out) sw.w /= sum;
  return out;
}

Vec3 warp_point(const Vec3& p, const DeformationGraph& graph, const GraphState& state) {
  Vec3 out = Vec3::Zero();
  for (const auto& sw : skinning_weights(p, graph)) {
    const Vec3& g = graph.nodes[sw.node];
    out += sw.w * (state.R[sw.node] * (p - g) + g + state.t[sw.node]);
  }
  return out;
}

PointCloud warp_cloud(const PointCloud& cloud, const DeformationGraph& graph,
                      const GraphState& state) {
  PointCloud out(cloud.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(cloud.size()); ++i)
    out[i] = warp_point(cloud[i], graph, state);
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 exp_so3(const Vec3& phi) {
  double angle = phi.norm();
  Mat3 K = skew(phi);
  if (angle < 1e-8) return Mat3::Identity() + K + 0.5 * K * K;
  double a = std::sin(angle) / angle;
  double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Mat3::Identity() + a * K + b * K * K;
}

namespace {

Mat3 reorthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  return svd.matrixU() * D * svd.matrixV().transpose();
}

}  // namespace

GraphState apply_update(const GraphState& state, const Eigen::VectorXd& delta) {
  const int n = static_cast<int>(state.R.size());
  if (delta.size() != 6 * n) throw ValidationError("update length must be 6 * node count");
  GraphState out = state;
  for (int i = 0; i < n; ++i) {
    Vec3 dphi = delta.segment<3>(3 * i);
    Vec3 dt = delta.segment<3>(3 * n + 3 * i);
    out.R[i] = reorthonormalize(exp_so3(dphi) * state.R[i]);
    out.t[i] = state.t[i] + dt;
  }
  return out;
}

}  // namespace pcm
