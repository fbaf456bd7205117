#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Input that violates a precondition or a file/schema contract. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown (degenerate fit, singular system). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Ordered set of 3D points in meters. Indices are stable ids.
using PointCloud = std::vector<Vec3>;

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.R = R.transpose();
    inv.t = -inv.R * t;
    return inv;
  }

  static RigidTransform identity() { return RigidTransform{}; }
};

struct Correspondence {
  int src = 0;
  int tgt = 0;
  double confidence = 1.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

/// Ground-truth or estimated warp S -> T. Rigid and graph warps are evaluable
/// anywhere; tabulated warps only at source points (by id).
class WarpFunction {
 public:
  enum class Kind { Rigid, Graph, Tabulated, Analytic };

  static WarpFunction identity() { return rigid(RigidTransform::identity()); }

  static WarpFunction rigid(const RigidTransform& tf) {
    WarpFunction w;
    w.kind_ = Kind::Rigid;
    w.rigid_ = tf;
    w.fn_ = [tf](const Vec3& p) { return tf.apply(p); };
    return w;
  }

  static WarpFunction analytic(std::function<Vec3(const Vec3&)> fn) {
    WarpFunction w;
    w.kind_ = Kind::Analytic;
    w.fn_ = std::move(fn);
    return w;
  }

  // Same as analytic but tagged as graph-backed; callers capture graph+state.
  static WarpFunction graph(std::function<Vec3(const Vec3&)> fn) {
    WarpFunction w;
    w.kind_ = Kind::Graph;
    w.fn_ = std::move(fn);
    return w;
  }

  static WarpFunction tabulated(std::vector<Vec3> displacements) {
    WarpFunction w;
    w.kind_ = Kind::Tabulated;
    w.disp_ = std::move(displacements);
    return w;
  }

  Kind kind() const { return kind_; }

  Vec3 operator()(const Vec3& p) const {
    if (!fn_) throw ValidationError("tabulated warp is evaluable only at source points");
    return fn_(p);
  }

  /// Evaluate at a source point with known id; works for every kind.
  Vec3 at(int source_id, const Vec3& p) const {
    if (kind_ == Kind::Tabulated) {
      if (source_id < 0 || source_id >= static_cast<int>(disp_.size()))
        throw ValidationError("tabulated warp: source id out of range");
      return p + disp_[source_id];
    }
    return fn_(p);
  }

  const RigidTransform& rigid_transform() const {
    if (kind_ != Kind::Rigid) throw ValidationError("warp is not rigid");
    return rigid_;
  }

 private:
  Kind kind_ = Kind::Rigid;
  RigidTransform rigid_;
  std::function<Vec3(const Vec3&)> fn_;
  std::vector<Vec3> disp_;
};

}  // namespace pcm
