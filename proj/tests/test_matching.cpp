#include "pcm/matching.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

using namespace pcm;

namespace {

Eigen::MatrixXd random_mat(std::mt19937_64& rng, int r, int c, double lo = -3, double hi = 3) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& S) {
  Eigen::MatrixXd out(S.rows(), S.cols());
  for (int i = 0; i < S.rows(); ++i) {
    double mx = S.row(i).maxCoeff();
    Eigen::ArrayXd e = (S.row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace

TEST_CASE("dual_softmax") {
  SUBCASE("1x1 matrix is 1 for any score") {
    for (double s : {-50.0, 0.0, 3.7, 1e4}) {
      Eigen::MatrixXd S = Eigen::MatrixXd::Constant(1, 1, s);
      CHECK(dual_softmax(S)(0, 0) == 1.0);
    }
  }
  SUBCASE("constant 2x2 matrix gives all 0.25") {
    Eigen::MatrixXd S = Eigen::MatrixXd::Constant(2, 2, 1.3);
    Eigen::MatrixXd C = dual_softmax(S);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(C(i, j) == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("equals the product of independently computed softmaxes") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd S = random_mat(rng, 5, 7);
      Eigen::MatrixXd C = dual_softmax(S);
      Eigen::MatrixXd rows = row_softmax(S);
      Eigen::MatrixXd cols = row_softmax(S.transpose()).transpose();
      CHECK((C - rows.cwiseProduct(cols)).lpNorm<Eigen::Infinity>() < 1e-14);
      // row-constant shift leaves the row factor unchanged
      Eigen::MatrixXd S2 = S;
      S2.row(2).array() += 11.0;
      Eigen::MatrixXd rows2 = row_softmax(S2);
      CHECK((rows2.row(2) - rows.row(2)).lpNorm<Eigen::Infinity>() < 1e-14);
    }
  }
  SUBCASE("entries bounded by both softmax factors") {
    std::mt19937_64 rng(42);
    Eigen::MatrixXd S = random_mat(rng, 9, 4);
    Eigen::MatrixXd C = dual_softmax(S);
    Eigen::MatrixXd rows = row_softmax(S);
    Eigen::MatrixXd cols = row_softmax(S.transpose()).transpose();
    for (int i = 0; i < S.rows(); ++i)
      for (int j = 0; j < S.cols(); ++j) {
        CHECK(C(i, j) >= 0.0);
        CHECK(C(i, j) <= std::min(rows(i, j), cols(i, j)) + 1e-15);
        CHECK(C(i, j) <= 1.0);
      }
  }
  SUBCASE("parallel equals serial reference") {
    std::mt19937_64 rng(43);
    Eigen::MatrixXd S = random_mat(rng, 40, 33);
    // association of the two divisions differs between the paths; agreement
    // is to rounding, not bit-exact
    CHECK((dual_softmax(S) - dual_softmax_serial(S)).lpNorm<Eigen::Infinity>() < 1e-15);
  }
}

TEST_CASE("select_matches") {
  SUBCASE("identity-dominant confidence with MNN gives the identity pairing") {
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(4, 4, 0.01);
    C.diagonal().setConstant(0.9);
    auto k = select_matches(C, {.theta_c = 0.1, .use_mnn = true});
    REQUIRE(k.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(k[i].src == i);
      CHECK(k[i].tgt == i);
      CHECK(k[i].confidence == 0.9);
    }
  }
  SUBCASE("all entries below the threshold gives an empty set") {
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(3, 3, 0.02);
    CHECK(select_matches(C, {.theta_c = 0.05}).empty());
  }
  SUBCASE("agrees with an exhaustive double-argmax oracle") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::MatrixXd C(5, 5);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) C(i, j) = u(rng);
      MatchConfig cfg{.theta_c = 0.3, .use_mnn = true};
      auto k = select_matches(C, cfg);
      std::set<std::pair<int, int>> got;
      for (const auto& m : k) got.emplace(m.src, m.tgt);
      std::set<std::pair<int, int>> expect;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
          if (C(i, j) <= cfg.theta_c) continue;
          bool row_best = true, col_best = true;
          for (int j2 = 0; j2 < 5; ++j2)
            if (C(i, j2) > C(i, j) || (C(i, j2) == C(i, j) && j2 < j)) row_best = false;
          for (int i2 = 0; i2 < 5; ++i2)
            if (C(i2, j) > C(i, j) || (C(i2, j) == C(i, j) && i2 < i)) col_best = false;
          if (row_best && col_best) expect.emplace(i, j);
        }
      CHECK(got == expect);
      // partial matching: no id repeats
      std::set<int> srcs, tgts;
      for (const auto& m : k) {
        CHECK(srcs.insert(m.src).second);
        CHECK(tgts.insert(m.tgt).second);
      }
    }
  }
}

TEST_CASE("top_soft_matches") {
  SUBCASE("n_hat = 1 returns the argmax with weight 1") {
    Eigen::MatrixXd C(2, 3);
    C << 0.1, 0.7, 0.2, 0.05, 0.3, 0.6;
    auto k = top_soft_matches(C, 1);
    REQUIRE(k.size() == 1);
    CHECK(k[0].src == 0);
    CHECK(k[0].tgt == 1);
    CHECK(k[0].confidence == 1.0);
  }
  SUBCASE("full matrix selection weights proportionally") {
    Eigen::MatrixXd C(2, 2);
    C << 1.0, 2.0, 3.0, 4.0;
    auto k = top_soft_matches(C, 4);
    REQUIRE(k.size() == 4);
    double sum = 0;
    for (const auto& m : k) sum += m.confidence;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& m : k)
      CHECK(m.confidence == doctest::Approx(C(m.src, m.tgt) / 10.0).epsilon(1e-12));
  }
  SUBCASE("agrees with an exhaustive sort oracle") {
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd C(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) C(i, j) = u(rng);
      auto k = top_soft_matches(C, 4);
      std::vector<std::pair<double, std::pair<int, int>>> all;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) all.push_back({C(i, j), {i, j}});
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      REQUIRE(k.size() == 4);
      for (int m = 0; m < 4; ++m) {
        CHECK(k[m].src == all[m].second.first);
        CHECK(k[m].tgt == all[m].second.second);
      }
    }
  }
  SUBCASE("all-zero confidence falls back to uniform weights") {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(3, 3);
    auto k = top_soft_matches(C, 3);
    REQUIRE(k.size() == 3);
    for (const auto& m : k) CHECK(m.confidence == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
}

TEST_CASE("score_matrix") {
  EncodingConfig cfg{.d = 6};

  SUBCASE("shared point, identity projections, unit feature gives 1/sqrt(d)") {
    Eigen::MatrixXd x(1, 6);
    x << 1, 0, 0, 0, 0, 0;
    PointCloud p{Vec3(0.4, -0.1, 0.9)};
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(6, 6);
    Eigen::MatrixXd S = score_matrix(x, p, x, p, I, I, cfg);
    CHECK(S(0, 0) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
  }
  SUBCASE("bilinear: scaling features scales scores quadratically") {
    std::mt19937_64 rng(46);
    Eigen::MatrixXd xs = random_mat(rng, 3, 6), xt = random_mat(rng, 2, 6);
    PointCloud ps{Vec3::Random(), Vec3::Random(), Vec3::Random()};
    PointCloud pt{Vec3::Random(), Vec3::Random()};
    Eigen::MatrixXd W = random_mat(rng, 6, 6);
    Eigen::MatrixXd a = score_matrix(xs, ps, xt, pt, W, W, cfg);
    Eigen::MatrixXd b = score_matrix((2.0 * xs).eval(), ps, (2.0 * xt).eval(), pt, W, W, cfg);
    CHECK((b - 4.0 * a).lpNorm<Eigen::Infinity>() < 1e-9);
  }
  SUBCASE("equals the relative-position form entry-wise") {
    std::mt19937_64 rng(47);
    Eigen::MatrixXd xs = random_mat(rng, 3, 6), xt = random_mat(rng, 2, 6);
    PointCloud ps{Vec3::Random(), Vec3::Random(), Vec3::Random()};
    PointCloud pt{Vec3::Random(), Vec3::Random()};
    Eigen::MatrixXd Ws = random_mat(rng, 6, 6), Wt = random_mat(rng, 6, 6);
    Eigen::MatrixXd S = score_matrix(xs, ps, xt, pt, Ws, Wt, cfg);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd a = Ws * xs.row(i).transpose();
        Eigen::VectorXd b = Wt * xt.row(j).transpose();
        double expect = a.dot(dense_theta(pt[j] - ps[i], cfg) * b) / std::sqrt(6.0);
        CHECK(std::abs(S(i, j) - expect) < 1e-9 * std::max(1.0, std::abs(expect)));
      }
  }
}
