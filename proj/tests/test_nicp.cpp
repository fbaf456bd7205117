#include "pcm/nicp.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

using namespace pcm;

namespace {

DeformationGraph small_graph(std::mt19937_64& rng, int n_nodes) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  DeformationGraph g;
  for (int i = 0; i < n_nodes; ++i) g.nodes.emplace_back(u(rng), u(rng), u(rng));
  g.gamma_skin = 0.05;
  g.skin_k = std::min(4, n_nodes);
  for (int i = 0; i + 1 < n_nodes; ++i) g.edges.emplace_back(i, i + 1);
  return g;
}

}  // namespace

TEST_CASE("corr_residual") {
  std::mt19937_64 rng(71);
  DeformationGraph g = small_graph(rng, 5);
  NicpConfig cfg;
  cfg.lambda_c = 1.0;

  SUBCASE("satisfied match gives zero") {
    GraphState st = GraphState::identity(5);
    Vec3 p(0.01, 0.02, 0.03);
    NicpMatch m{p, warp_point(p, g, st), 1.0};
    CHECK(corr_residual(m, g, st, cfg).norm() < 1e-15);
  }
  SUBCASE("direct substitution: identity state, unit offset") {
    GraphState st = GraphState::identity(5);
    NicpMatch m{Vec3::Zero(), Vec3(1, 0, 0), 1.0};
    Vec3 r = corr_residual(m, g, st, cfg);
    CHECK((r - Vec3(-1, 0, 0)).norm() < 1e-15);
  }
  SUBCASE("zero confidence annihilates the residual") {
    GraphState st = GraphState::identity(5);
    NicpMatch m{Vec3::Zero(), Vec3(5, 5, 5), 0.0};
    CHECK(corr_residual(m, g, st, cfg).norm() == 0.0);
  }
  SUBCASE("scales with sqrt(lambda_c)") {
    GraphState st = GraphState::identity(5);
    NicpMatch m{Vec3::Zero(), Vec3(1, 0, 0), 1.0};
    NicpConfig c4 = cfg;
    c4.lambda_c = 4.0;
    CHECK(corr_residual(m, g, st, c4).norm() ==
          doctest::Approx(2.0 * corr_residual(m, g, st, cfg).norm()).epsilon(1e-14));
  }
}

TEST_CASE("reg_residual") {
  std::mt19937_64 rng(72);
  DeformationGraph g = small_graph(rng, 6);
  NicpConfig cfg;
  cfg.lambda_a = 1.0;

  SUBCASE("identity state gives zero on every edge") {
    GraphState st = GraphState::identity(6);
    for (auto [i, j] : g.edges) {
      CHECK(reg_residual(i, j, g, st, cfg).norm() < 1e-15);
      CHECK(reg_residual(j, i, g, st, cfg).norm() < 1e-15);
    }
  }
  SUBCASE("translating one node perturbs only its outgoing residuals") {
    GraphState st = GraphState::identity(6);
    st.t[0] = Vec3(1, 0, 0);
    CHECK((reg_residual(0, 1, g, st, cfg) - Vec3(1, 0, 0)).norm() < 1e-15);
    // residual into node 0 from the other side
    CHECK((reg_residual(1, 0, g, st, cfg) - Vec3(-1, 0, 0)).norm() < 1e-15);
    CHECK(reg_residual(2, 3, g, st, cfg).norm() < 1e-15);
  }
  SUBCASE("consistent global rigid motion is in the null space") {
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
      Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
      Mat3 R0 = Eigen::AngleAxisd(axis.norm(), axis.normalized()).toRotationMatrix();
      Vec3 t0(gauss(rng), gauss(rng), gauss(rng));
      GraphState st = GraphState::identity(6);
      for (int i = 0; i < 6; ++i) {
        st.R[i] = R0;
        st.t[i] = R0 * g.nodes[i] + t0 - g.nodes[i];
      }
      for (auto [i, j] : g.edges) {
        CHECK(reg_residual(i, j, g, st, cfg).squaredNorm() < 1e-18);
      }
    }
  }
}

TEST_CASE("energy equals the squared residual norm") {
  std::mt19937_64 rng(73);
  DeformationGraph g = small_graph(rng, 7);
  NicpConfig cfg;
  std::normal_distribution<double> gauss;
  std::vector<NicpMatch> matches;
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int i = 0; i < 15; ++i)
    matches.push_back({Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)),
                       std::abs(gauss(rng))});
  GraphState st = GraphState::identity(7);
  for (int i = 0; i < 7; ++i) {
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    st.R[i] = Eigen::AngleAxisd(0.3 * axis.norm(), axis.normalized()).toRotationMatrix();
    st.t[i] = 0.05 * Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  double e = energy(g, st, matches, cfg);
  auto sys = assemble(g, st, matches, cfg);
  CHECK(e == doctest::Approx(sys.r.squaredNorm()).epsilon(1e-10));

  SUBCASE("hand case: one unit residual, no edges") {
    DeformationGraph g1;
    g1.nodes = {Vec3::Zero()};
    g1.skin_k = 1;
    g1.gamma_skin = 0.05;
    GraphState id = GraphState::identity(1);
    std::vector<NicpMatch> one{{Vec3::Zero(), Vec3(1, 0, 0), 1.0}};
    NicpConfig c;
    c.lambda_c = 1.0;
    CHECK(energy(g1, id, one, c) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("assemble") {
  NicpConfig cfg;

  SUBCASE("zero-confidence matches produce all-zero rows") {
    std::mt19937_64 rng(74);
    DeformationGraph g = small_graph(rng, 4);
    GraphState st = GraphState::identity(4);
    std::vector<NicpMatch> matches{{Vec3(0.01, 0, 0), Vec3(0.5, 0.5, 0.5), 0.0}};
    auto sys = assemble(g, st, matches, cfg);
    CHECK(sys.r.head(3).norm() == 0.0);
    Eigen::MatrixXd J = Eigen::MatrixXd(sys.J);
    CHECK(J.topRows(3).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("single node, match at the node: translation block is sqrt(lc)*c*I") {
    DeformationGraph g1;
    g1.nodes = {Vec3(0.2, 0.3, 0.4)};
    g1.skin_k = 1;
    g1.gamma_skin = 0.05;
    GraphState st = GraphState::identity(1);
    double c = 0.7;
    NicpConfig cc;
    cc.lambda_c = 9.0;
    std::vector<NicpMatch> matches{{g1.nodes[0], Vec3(1, 1, 1), c}};
    auto sys = assemble(g1, st, matches, cc);
    Eigen::MatrixXd J = Eigen::MatrixXd(sys.J);
    // columns 0..2 = phi block, 3..5 = t block
    Eigen::MatrixXd t_block = J.block(0, 3, 3, 3);
    CHECK((t_block - 3.0 * c * Eigen::MatrixXd::Identity(3, 3)).lpNorm<Eigen::Infinity>() <
          1e-14);
    // phi block vanishes because p_s - g = 0
    CHECK(J.block(0, 0, 3, 3).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SUBCASE("Jacobian matches central finite differences") {
    std::mt19937_64 rng(75);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 5; ++trial) {
      DeformationGraph g = small_graph(rng, 5);
      GraphState st = GraphState::identity(5);
      for (int i = 0; i < 5; ++i) {
        Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
        st.R[i] = Eigen::AngleAxisd(0.2 * axis.norm(), axis.normalized()).toRotationMatrix();
        st.t[i] = 0.03 * Vec3(gauss(rng), gauss(rng), gauss(rng));
      }
      std::vector<NicpMatch> matches;
      for (int i = 0; i < 8; ++i)
        matches.push_back({Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), 1.0});
      NicpConfig cfg2;
      auto sys = assemble(g, st, matches, cfg2);
      Eigen::MatrixXd J = Eigen::MatrixXd(sys.J);
      const double h = 1e-6;
      const int cols = 6 * 5;
      for (int col = 0; col < cols; ++col) {
        Eigen::VectorXd dp = Eigen::VectorXd::Zero(cols);
        dp[col] = h;
        auto plus = assemble(g, apply_update(st, dp), matches, cfg2);
        dp[col] = -h;
        auto minus = assemble(g, apply_update(st, dp), matches, cfg2);
        Eigen::VectorXd fd = (plus.r - minus.r) / (2.0 * h);
        for (int row = 0; row < fd.size(); ++row) {
          double an = J(row, col);
          double err = std::abs(fd[row] - an) / std::max(1.0, std::abs(an));
          CHECK(err < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("gauss_newton_solve") {
  NicpConfig cfg;

  SUBCASE("already-satisfied matches converge immediately") {
    std::mt19937_64 rng(76);
    DeformationGraph g = small_graph(rng, 5);
    GraphState st = GraphState::identity(5);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<NicpMatch> matches;
    for (int i = 0; i < 10; ++i) {
      Vec3 p(u(rng), u(rng), u(rng));
      matches.push_back({p, p, 1.0});
    }
    auto result = gauss_newton_solve(g, st, matches, cfg);
    REQUIRE(!result.trace.empty());
    CHECK(result.trace.back().energy < 1e-20);
    CHECK(result.trace.size() <= 3);
  }
  SUBCASE("energy trace is non-increasing") {
    std::mt19937_64 rng(77);
    DeformationGraph g = small_graph(rng, 6);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<NicpMatch> matches;
    for (int i = 0; i < 20; ++i) {
      Vec3 p(u(rng), u(rng), u(rng));
      matches.push_back({p, p + Vec3(0.05, -0.02, 0.01), 1.0});
    }
    NicpConfig c;
    c.lambda_a = 0.1;
    auto result = gauss_newton_solve(g, GraphState::identity(6), matches, c);
    for (size_t i = 1; i < result.trace.size(); ++i)
      CHECK(result.trace[i].energy <= result.trace[i - 1].energy + 1e-15);
  }
  SUBCASE("pure translation recovered exactly") {
    std::mt19937_64 rng(78);
    DeformationGraph g = small_graph(rng, 6);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    Vec3 delta(0.04, -0.02, 0.06);
    std::vector<NicpMatch> matches;
    for (int i = 0; i < 30; ++i) {
      Vec3 p(u(rng), u(rng), u(rng));
      matches.push_back({p, p + delta, 1.0});
    }
    auto result = gauss_newton_solve(g, GraphState::identity(6), matches, cfg);
    for (const auto& m : matches)
      CHECK((warp_point(m.src, g, result.state) - m.tgt).norm() < 1e-8);
  }
  SUBCASE("trace JSON lines expose the expected fields") {
    std::mt19937_64 rng(79);
    DeformationGraph g = small_graph(rng, 4);
    std::vector<NicpMatch> matches{{Vec3::Zero(), Vec3(0.01, 0, 0), 1.0},
                                   {Vec3(0.05, 0, 0), Vec3(0.06, 0, 0), 1.0},
                                   {Vec3(0, 0.05, 0), Vec3(0.01, 0.05, 0), 1.0}};
    auto result = gauss_newton_solve(g, GraphState::identity(4), matches, cfg);
    std::string json = result.trace_json();
    CHECK(json.find("\"iteration\"") != std::string::npos);
    CHECK(json.find("\"energy\"") != std::string::npos);
    CHECK(json.find("\"step_norm\"") != std::string::npos);
    CHECK(json.find("\"damping\"") != std::string::npos);
  }
}
