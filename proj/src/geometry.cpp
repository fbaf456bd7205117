#include "pcm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace pcm {

namespace {
constexpr int kLeafSize = 16;
}

KdTree::KdTree(const PointCloud& cloud) : points_(cloud) {
  order_.resize(points_.size());
  for (int i = 0; i < static_cast<int>(points_.size()); ++i) order_[i] = i;
  if (!points_.empty()) root_ = build(0, static_cast<int>(points_.size()), 0);
}

int KdTree::build(int begin, int end, int depth) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  // Split along the widest axis of the bounding box.
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     double pa = points_[a][axis], pb = points_[b][axis];
                     if (pa != pb) return pa < pb;
                     return a < b;
                   });
  node.axis = axis;
  node.split = points_[order_[mid]][axis];
  int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  int left = build(begin, mid, depth + 1);
  int right = build(mid, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree::search(int node_id, const Vec3& q, int& best_id, double& best_d2) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      int id = order_[i];
      double d2 = (points_[id] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && id < best_id)) {
        best_d2 = d2;
        best_id = id;
      }
    }
    return;
  }
  double diff = q[node.axis] - node.split;
  int near = diff <= 0 ? node.left : node.right;
  int far = diff <= 0 ? node.right : node.left;
  search(near, q, best_id, best_d2);
  if (diff * diff <= best_d2) search(far, q, best_id, best_d2);
}

std::pair<int, double> KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw ValidationError("empty target");
  int best_id = std::numeric_limits<int>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best_id, best_d2);
  return {best_id, std::sqrt(best_d2)};
}

void KdTree::searchK(int node_id, const Vec3& q, int k,
                     std::vector<std::pair<double, int>>& heap) const {
  const Node& node = nodes_[node_id];
  auto worse = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    return a < b;  // max-heap on (distance, id)
  };
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      int id = order_[i];
      std::pair<double, int> cand{(points_[id] - q).squaredNorm(), id};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), worse);
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end(), worse);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), worse);
      }
    }
    return;
  }
  double diff = q[node.axis] - node.split;
  int near = diff <= 0 ? node.left : node.right;
  int far = diff <= 0 ? node.right : node.left;
  searchK(near, q, k, heap);
  if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().first)
    searchK(far, q, k, heap);
}

std::vector<int> KdTree::knearest(const Vec3& query, int k) const {
  if (points_.empty()) throw ValidationError("empty target");
  k = std::min<int>(k, static_cast<int>(points_.size()));
  std::vector<std::pair<double, int>> heap;
  heap.reserve(k + 1);
  searchK(root_, query, k, heap);
  std::sort(heap.begin(), heap.end());
  std::vector<int> ids(heap.size());
  for (size_t i = 0; i < heap.size(); ++i) ids[i] = heap[i].second;
  return ids;
}

SubsampleResult grid_subsample(const PointCloud& cloud, double voxel, bool use_centroid) {
  if (voxel <= 0) throw ValidationError("voxel must be positive");
  struct Cell {
    Vec3 sum = Vec3::Zero();
    int count = 0;
    int out_id = -1;
  };
  struct KeyHash {
    size_t operator()(const std::array<long long, 3>& k) const {
      size_t h = 1469598103934665603ull;
      for (long long v : k) {
        h ^= static_cast<size_t>(v);
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  std::unordered_map<std::array<long long, 3>, Cell, KeyHash> cells;
  SubsampleResult out;
  out.cell_of.resize(cloud.size(), -1);
  int next_id = 0;
  std::vector<std::array<long long, 3>> keys_in_order;
  for (size_t i = 0; i < cloud.size(); ++i) {
    std::array<long long, 3> key{static_cast<long long>(std::floor(cloud[i].x() / voxel)),
                                 static_cast<long long>(std::floor(cloud[i].y() / voxel)),
                                 static_cast<long long>(std::floor(cloud[i].z() / voxel))};
    Cell& c = cells[key];
    if (c.count == 0) {
      c.out_id = next_id++;
      keys_in_order.push_back(key);
    }
    c.sum += cloud[i];
    c.count += 1;
    out.cell_of[i] = c.out_id;
  }
  out.cloud.resize(next_id);
  for (const auto& key : keys_in_order) {
    const Cell& c = cells[key];
    out.cloud[c.out_id] = c.sum / c.count;
  }
  if (!use_centroid) {
    // Replace each centroid with the closest input point of the cell (lowest id on ties).
    std::vector<double> best(next_id, std::numeric_limits<double>::infinity());
    std::vector<int> pick(next_id, -1);
    for (size_t i = 0; i < cloud.size(); ++i) {
      int cid = out.cell_of[i];
      double d2 = (cloud[i] - out.cloud[cid]).squaredNorm();
      if (d2 < best[cid]) {
        best[cid] = d2;
        pick[cid] = static_cast<int>(i);
      }
    }
    for (int c = 0; c < next_id; ++c) out.cloud[c] = cloud[pick[c]];
  }
  return out;
}

std::pair<int, double> nearest_neighbor(const Vec3& query, const PointCloud& cloud) {
  if (cloud.empty()) throw ValidationError("empty target");
  int best_id = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    double d2 = (cloud[i] - query).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_id = i;
    }
  }
  return {best_id, std::sqrt(best_d2)};
}

std::vector<std::pair<int, double>> batch_nearest_neighbors(const PointCloud& queries,
                                                            const KdTree& tree) {
  std::vector<std::pair<int, double>> out(queries.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(queries.size()); ++i)
    out[i] = tree.nearest(queries[i]);
  return out;
}

std::vector<std::pair<int, double>> batch_nearest_neighbors_serial(
    const PointCloud& queries, const PointCloud& cloud) {
  std::vector<std::pair<int, double>> out(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) out[i] = nearest_neighbor(queries[i], cloud);
  return out;
}

OverlapResult overlap_set(const PointCloud& S, const PointCloud& T,
                          const WarpFunction& warp, double sigma) {
  if (sigma <= 0) throw ValidationError("sigma must be positive");
  OverlapResult res;
  if (S.empty() || T.empty()) return res;
  KdTree tree(T);
  std::vector<char> in(S.size(), 0);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(S.size()); ++i) {
    Vec3 w = warp.at(static_cast<int>(i), S[i]);
    if (tree.nearest(w).second < sigma) in[i] = 1;
  }
  for (size_t i = 0; i < S.size(); ++i)
    if (in[i]) res.ids.push_back(static_cast<int>(i));
  res.ratio = static_cast<double>(res.ids.size()) / static_cast<double>(S.size());
  return res;
}

CorrespondenceSet mutual_nn_correspondences(const PointCloud& S_warped,
                                            const PointCloud& T, double radius) {
  if (radius <= 0) throw ValidationError("radius must be positive");
  CorrespondenceSet out;
  if (S_warped.empty() || T.empty()) return out;
  KdTree treeT(T);
  KdTree treeS(S_warped);
  auto s_to_t = batch_nearest_neighbors(S_warped, treeT);
  auto t_to_s = batch_nearest_neighbors(T, treeS);
  for (int i = 0; i < static_cast<int>(S_warped.size()); ++i) {
    int j = s_to_t[i].first;
    if (t_to_s[j].first == i && s_to_t[i].second < radius)
      out.push_back({i, j, 1.0});
  }
  return out;
}

}  // namespace pcm
