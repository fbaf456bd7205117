#include "pcm/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace pcm;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, double extent = 1.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  PointCloud c(n);
  for (auto& p : c) p = Vec3(u(rng), u(rng), u(rng));
  return c;
}

}  // namespace

TEST_CASE("grid_subsample basics") {
  SUBCASE("singleton is returned unchanged") {
    PointCloud c{{0.3, 0.4, 0.5}};
    auto r = grid_subsample(c, 1.0);
    REQUIRE(r.cloud.size() == 1);
    CHECK(r.cloud[0] == c[0]);
    CHECK(r.cell_of[0] == 0);
  }
  SUBCASE("cube corners collapse to the center") {
    PointCloud c;
    for (int i = 0; i < 8; ++i)
      c.emplace_back(0.01 * (i & 1), 0.01 * ((i >> 1) & 1), 0.01 * ((i >> 2) & 1));
    auto r = grid_subsample(c, 0.1);
    REQUIRE(r.cloud.size() == 1);
    CHECK((r.cloud[0] - Vec3(0.005, 0.005, 0.005)).norm() < 1e-15);
  }
  SUBCASE("empty input is not an error") {
    CHECK(grid_subsample({}, 0.1).cloud.empty());
  }
  SUBCASE("non-positive voxel rejected") {
    CHECK_THROWS_AS(grid_subsample({{0, 0, 0}}, 0.0), ValidationError);
  }
  SUBCASE("density never increases and cells stay within bounds") {
    std::mt19937_64 rng(1);
    PointCloud c = random_cloud(rng, 200);
    auto once = grid_subsample(c, 0.25);
    CHECK(once.cloud.size() <= c.size());
    REQUIRE(once.cell_of.size() == c.size());
    for (size_t i = 0; i < c.size(); ++i) {
      int cell = once.cell_of[i];
      REQUIRE(cell >= 0);
      REQUIRE(cell < static_cast<int>(once.cloud.size()));
      // A point and its cell representative share the same voxel, so they are
      // within one voxel diagonal of each other.
      CHECK((c[i] - once.cloud[cell]).norm() <= 0.25 * std::sqrt(3.0) + 1e-12);
    }
    auto twice = grid_subsample(once.cloud, 0.25);
    CHECK(twice.cloud.size() <= once.cloud.size());
  }
  SUBCASE("point-select mode returns input points") {
    std::mt19937_64 rng(2);
    PointCloud c = random_cloud(rng, 50);
    auto r = grid_subsample(c, 0.5, false);
    for (const auto& p : r.cloud) {
      bool found = false;
      for (const auto& q : c)
        if ((p - q).norm() == 0.0) found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("nearest_neighbor") {
  SUBCASE("exact hit") {
    PointCloud c{{1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
    auto [id, d] = nearest_neighbor(c[1], c);
    CHECK(id == 1);
    CHECK(d == 0.0);
  }
  SUBCASE("direct distances") {
    PointCloud c{{1, 0, 0}, {0, 2, 0}};
    auto [id, d] = nearest_neighbor({0, 0, 0}, c);
    CHECK(id == 0);
    CHECK(d == doctest::Approx(1.0));
  }
  SUBCASE("empty cloud is an error") {
    CHECK_THROWS_AS(nearest_neighbor({0, 0, 0}, {}), ValidationError);
  }
  SUBCASE("kd-tree agrees with exhaustive scan") {
    std::mt19937_64 rng(3);
    for (int inst = 0; inst < 100; ++inst) {
      PointCloud c = random_cloud(rng, 97);
      KdTree tree(c);
      PointCloud queries = random_cloud(rng, 10);
      for (const auto& q : queries) {
        auto brute = nearest_neighbor(q, c);
        auto fast = tree.nearest(q);
        CHECK(fast.first == brute.first);
      }
    }
  }
  SUBCASE("tie broken by lowest id") {
    PointCloud c{{1, 0, 0}, {-1, 0, 0}};
    CHECK(nearest_neighbor({0, 0, 0}, c).first == 0);
    KdTree tree(c);
    CHECK(tree.nearest({0, 0, 0}).first == 0);
  }
  SUBCASE("batch parallel equals serial reference") {
    std::mt19937_64 rng(4);
    PointCloud c = random_cloud(rng, 1000);
    PointCloud q = random_cloud(rng, 300);
    KdTree tree(c);
    auto par = batch_nearest_neighbors(q, tree);
    auto ser = batch_nearest_neighbors_serial(q, c);
    for (size_t i = 0; i < q.size(); ++i) CHECK(par[i].first == ser[i].first);
  }
}

TEST_CASE("overlap_set") {
  std::mt19937_64 rng(5);
  PointCloud S = random_cloud(rng, 100);
  SUBCASE("self pair is fully overlapping for any sigma") {
    for (double sigma : {1e-6, 0.01, 1.0}) {
      auto r = overlap_set(S, S, WarpFunction::identity(), sigma);
      CHECK(r.ratio == 1.0);
      CHECK(r.ids.size() == S.size());
    }
  }
  SUBCASE("far translation empties the set") {
    double sigma = 0.04;
    PointCloud T = S;
    for (auto& p : T) p.x() += 10.0 * sigma + 2.0;  // beyond cloud extent too
    auto r = overlap_set(S, T, WarpFunction::identity(), sigma);
    CHECK(r.ids.empty());
    CHECK(r.ratio == 0.0);
  }
  SUBCASE("empty target yields ratio 0") {
    auto r = overlap_set(S, {}, WarpFunction::identity(), 0.04);
    CHECK(r.ids.empty());
    CHECK(r.ratio == 0.0);
  }
}

TEST_CASE("mutual_nn_correspondences") {
  SUBCASE("identical clouds pair identically") {
    std::mt19937_64 rng(6);
    PointCloud S = random_cloud(rng, 60);
    auto k = mutual_nn_correspondences(S, S, 0.01);
    REQUIRE(k.size() == S.size());
    for (const auto& m : k) {
      CHECK(m.src == m.tgt);
      CHECK(m.confidence == 1.0);
    }
  }
  SUBCASE("clusters pair only internally") {
    PointCloud S{{0, 0, 0}, {0.01, 0, 0}, {5, 0, 0}, {5.01, 0, 0}};
    PointCloud T{{0.002, 0, 0}, {5.002, 0, 0}};
    auto k = mutual_nn_correspondences(S, T, 0.05);
    // Exhaustive check: every returned pair is a mutual NN under the radius.
    for (const auto& m : k) {
      CHECK(nearest_neighbor(S[m.src], T).first == m.tgt);
      CHECK(nearest_neighbor(T[m.tgt], S).first == m.src);
      CHECK((S[m.src] - T[m.tgt]).norm() < 0.05);
    }
    REQUIRE(k.size() == 2);
    CHECK(k[0].src == 0);
    CHECK(k[0].tgt == 0);
    CHECK(k[1].src == 2);
    CHECK(k[1].tgt == 1);
  }
  SUBCASE("symmetric under swapping the clouds") {
    std::mt19937_64 rng(7);
    PointCloud S = random_cloud(rng, 40);
    PointCloud T = random_cloud(rng, 50);
    auto st = mutual_nn_correspondences(S, T, 0.5);
    auto ts = mutual_nn_correspondences(T, S, 0.5);
    REQUIRE(st.size() == ts.size());
    std::set<std::pair<int, int>> a, b;
    for (const auto& m : st) a.emplace(m.src, m.tgt);
    for (const auto& m : ts) b.emplace(m.tgt, m.src);
    CHECK(a == b);
  }
}
