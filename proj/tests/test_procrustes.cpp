#include "pcm/procrustes.hpp"
#include "pcm/rope.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>

using namespace pcm;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

double rotation_angle(const Mat3& A, const Mat3& B) {
  // atan2 form: accurate for tiny angles where acos of the trace saturates.
  Mat3 E = A.transpose() * B;
  Vec3 w(E(2, 1) - E(1, 2), E(0, 2) - E(2, 0), E(1, 0) - E(0, 1));
  return std::atan2(0.5 * w.norm(), 0.5 * (E.trace() - 1.0));
}

PointCloud random_cloud(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  PointCloud c(n);
  for (auto& p : c) p = Vec3(u(rng), u(rng), u(rng));
  return c;
}

CorrespondenceSet identity_pairs(int n, double conf = 1.0) {
  CorrespondenceSet k;
  for (int i = 0; i < n; ++i) k.push_back({i, i, conf});
  return k;
}

}  // namespace

TEST_CASE("soft_procrustes") {
  std::mt19937_64 rng(51);

  SUBCASE("identical clouds give the identity transform") {
    PointCloud S = random_cloud(rng, 10);
    auto tf = soft_procrustes(identity_pairs(10), S, S);
    CHECK((tf.R - Mat3::Identity()).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(tf.t.lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("recovers a known rigid motion exactly") {
    for (int trial = 0; trial < 50; ++trial) {
      PointCloud S = random_cloud(rng, 4 + trial % 30);
      Mat3 R0 = random_rotation(rng);
      Vec3 t0 = Vec3::Random();
      PointCloud T;
      for (const auto& p : S) T.push_back(R0 * p + t0);
      auto tf = soft_procrustes(identity_pairs(static_cast<int>(S.size())), S, T);
      CHECK(rotation_angle(tf.R, R0) < 1e-8);
      CHECK((tf.t - t0).norm() < 1e-9);
    }
  }
  SUBCASE("output is always a proper rotation, even for near-planar input") {
    for (int trial = 0; trial < 50; ++trial) {
      PointCloud S = random_cloud(rng, 12);
      for (auto& p : S) p.z() *= 1e-9;  // squash to a plane
      Mat3 R0 = random_rotation(rng);
      PointCloud T;
      std::normal_distribution<double> g(0.0, 0.05);
      for (const auto& p : S) T.push_back(R0 * p + Vec3(g(rng), g(rng), g(rng)));
      auto tf = soft_procrustes(identity_pairs(12), S, T);
      CHECK((tf.R.transpose() * tf.R - Mat3::Identity()).lpNorm<Eigen::Infinity>() < 1e-10);
      CHECK(tf.R.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
  SUBCASE("equivariance under a common rotation") {
    PointCloud S = random_cloud(rng, 20);
    PointCloud T = random_cloud(rng, 20);
    auto base = soft_procrustes(identity_pairs(20), S, T);
    Mat3 Q = random_rotation(rng);
    PointCloud SQ, TQ;
    for (const auto& p : S) SQ.push_back(Q * p);
    for (const auto& p : T) TQ.push_back(Q * p);
    auto rot = soft_procrustes(identity_pairs(20), SQ, TQ);
    CHECK((rot.R - Q * base.R * Q.transpose()).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((rot.t - Q * base.t).norm() < 1e-8);
  }
  SUBCASE("weight scale invariance") {
    PointCloud S = random_cloud(rng, 15);
    PointCloud T = random_cloud(rng, 15);
    CorrespondenceSet k;
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int i = 0; i < 15; ++i) k.push_back({i, i, u(rng)});
    auto a = soft_procrustes(k, S, T);
    for (auto& m : k) m.confidence *= 37.5;
    auto b = soft_procrustes(k, S, T);
    CHECK((a.R - b.R).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((a.t - b.t).norm() < 1e-10);
  }
  SUBCASE("fewer than 3 pairs rejected") {
    PointCloud S = random_cloud(rng, 2), T = random_cloud(rng, 2);
    CHECK_THROWS_AS(soft_procrustes(identity_pairs(2), S, T), NumericalError);
  }
  SUBCASE("collinear source points are degenerate") {
    PointCloud S{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    PointCloud T = S;
    CHECK_THROWS_AS(soft_procrustes(identity_pairs(4), S, T), NumericalError);
  }
  SUBCASE("uncentered variant differs from Kabsch when centroids are offset") {
    // Kept only to document the behavioral difference between the two forms.
    PointCloud S = random_cloud(rng, 10);
    Vec3 t0(5, 0, 0);
    PointCloud T;
    for (const auto& p : S) T.push_back(p + t0);
    auto kabsch = soft_procrustes(identity_pairs(10), S, T, ProcrustesVariant::Kabsch);
    CHECK(rotation_angle(kabsch.R, Mat3::Identity()) < 1e-8);
    CHECK((kabsch.t - t0).norm() < 1e-9);
    auto printed = soft_procrustes(identity_pairs(10), S, T, ProcrustesVariant::AsPrinted);
    CHECK(rotation_angle(printed.R, Mat3::Identity()) > 1e-3);
  }
}

TEST_CASE("reposition") {
  std::mt19937_64 rng(52);

  SUBCASE("identity transform changes nothing") {
    PointCloud S = random_cloud(rng, 8);
    PointCloud out = reposition(S, RigidTransform::identity());
    for (size_t i = 0; i < S.size(); ++i) CHECK((out[i] - S[i]).norm() == 0.0);
  }
  SUBCASE("exact GT maps source onto its correspondents") {
    PointCloud S = random_cloud(rng, 25);
    RigidTransform tf{random_rotation(rng), Vec3::Random()};
    PointCloud T;
    for (const auto& p : S) T.push_back(tf.apply(p));
    PointCloud out = reposition(S, tf);
    for (size_t i = 0; i < S.size(); ++i) CHECK((out[i] - T[i]).norm() < 1e-12);
  }
  SUBCASE("repositioning then refitting the same pairs yields identity") {
    PointCloud S = random_cloud(rng, 20);
    RigidTransform tf{random_rotation(rng), Vec3::Random()};
    PointCloud T;
    for (const auto& p : S) T.push_back(tf.apply(p));
    PointCloud S2 = reposition(S, tf);
    auto refit = soft_procrustes(identity_pairs(20), S2, T);
    CHECK(rotation_angle(refit.R, Mat3::Identity()) < 1e-8);
    CHECK(refit.t.norm() < 1e-8);
  }
  SUBCASE("after GT repositioning the encoded dot equals the plain dot") {
    EncodingConfig cfg{.d = 12};
    PointCloud S = random_cloud(rng, 5);
    RigidTransform tf{random_rotation(rng), Vec3::Random()};
    PointCloud T;
    for (const auto& p : S) T.push_back(tf.apply(p));
    PointCloud S2 = reposition(S, tf);
    std::normal_distribution<double> g;
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd x(12), y(12);
      for (int m = 0; m < 12; ++m) {
        x[m] = g(rng);
        y[m] = g(rng);
      }
      double rel = relative_dot(x, S2[i], y, T[i], cfg);
      CHECK(std::abs(rel - x.dot(y)) < 1e-9 * std::max(1.0, std::abs(x.dot(y))));
    }
  }
}
