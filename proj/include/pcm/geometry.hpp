#pragma once

#include "pcm/types.hpp"

#include <utility>
#include <vector>

namespace pcm {

/// Exact nearest-neighbor search over a fixed cloud. Ties broken by lowest id.
/// Immutable after construction; concurrent queries are safe.
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud);

  bool empty() const { return points_.empty(); }
  int size() const { return static_cast<int>(points_.size()); }

  /// Returns (id, distance). Throws ValidationError on an empty cloud.
  std::pair<int, double> nearest(const Vec3& query) const;

  /// Ids of the k nearest points, ordered by (distance, id). k is clamped to size.
  std::vector<int> knearest(const Vec3& query, int k) const;

 private:
  struct Node {
    int axis = -1;       // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // index range into order_ for leaves
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& q, int& best_id, double& best_d2) const;
  void searchK(int node, const Vec3& q, int k,
               std::vector<std::pair<double, int>>& heap) const;

  PointCloud points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct SubsampleResult {
  PointCloud cloud;
  std::vector<int> cell_of;  // original id -> output cell id
};

/// One output point per non-empty voxel, at the cell centroid (or, with
/// use_centroid=false, the input point closest to the centroid). The grid is
/// anchored at the coordinate origin: cell = floor(p / voxel).
SubsampleResult grid_subsample(const PointCloud& cloud, double voxel,
                               bool use_centroid = true);

/// (id, distance) of the closest point of `cloud` to `query`; ties -> lowest id.
std::pair<int, double> nearest_neighbor(const Vec3& query, const PointCloud& cloud);

/// Batch exact NN via k-d tree; queries processed in parallel.
std::vector<std::pair<int, double>> batch_nearest_neighbors(const PointCloud& queries,
                                                            const KdTree& tree);

/// Serial O(n*m) reference for batch NN; kept for tests and benchmarks.
std::vector<std::pair<int, double>> batch_nearest_neighbors_serial(
    const PointCloud& queries, const PointCloud& cloud);

struct OverlapResult {
  std::vector<int> ids;  // source ids with a target neighbor within sigma after warp
  double ratio = 0.0;    // |ids| / |S|
};

OverlapResult overlap_set(const PointCloud& S, const PointCloud& T,
                          const WarpFunction& warp, double sigma);

/// Mutual nearest neighbors between S_warped and T below `radius`; confidence 1.
CorrespondenceSet mutual_nn_correspondences(const PointCloud& S_warped,
                                            const PointCloud& T, double radius);

}  // namespace pcm
