#include "pcm/nicp.hpp"

#include <Eigen/LU>
#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace pcm {

Vec3 corr_residual(const NicpMatch& match, const DeformationGraph& graph,
                   const GraphState& state, const NicpConfig& config) {
  return std::sqrt(config.lambda_c) * match.confidence *
         (warp_point(match.src, graph, state) - match.tgt);
}

Vec3 reg_residual(int i, int j, const DeformationGraph& graph, const GraphState& state,
                  const NicpConfig& config) {
  const Vec3 &gi = graph.nodes[i], &gj = graph.nodes[j];
  return std::sqrt(config.lambda_a) *
         (state.R[i] * (gj - gi) + gi + state.t[i] - (gj + state.t[j]));
}

AssembledSystem assemble(const DeformationGraph& graph, const GraphState& state,
                         const std::vector<NicpMatch>& matches, const NicpConfig& config) {
  config.validate();
  const int nv = static_cast<int>(graph.nodes.size());
  const int nk = static_cast<int>(matches.size());
  const int ne = static_cast<int>(graph.edges.size());
  const double sqrt_lc = std::sqrt(config.lambda_c);
  const double sqrt_la = std::sqrt(config.lambda_a);

  AssembledSystem sys;
  sys.r.resize(3 * (nk + ne));
  sys.J.resize(3 * (nk + ne), 6 * nv);

  // Skinning sets fix the sparsity pattern; compute them (and per-row triplet
  // offsets) first so rows can be filled in parallel.
  std::vector<std::vector<SkinWeight>> skins(nk);
#pragma omp parallel for schedule(static)
  for (long long m = 0; m < nk; ++m) skins[m] = skinning_weights(matches[m].src, graph);

  std::vector<long long> offset(nk + ne + 1, 0);
  for (int m = 0; m < nk; ++m) offset[m + 1] = offset[m] + 18 * skins[m].size();
  for (int e = 0; e < ne; ++e) offset[nk + e + 1] = offset[nk + e] + 27;
  std::vector<Eigen::Triplet<double>> trip(offset.back());

#pragma omp parallel for schedule(static)
  for (long long m = 0; m < nk; ++m) {
    const NicpMatch& match = matches[m];
    const double cw = sqrt_lc * match.confidence;
    Vec3 warped = Vec3::Zero();
    long long at = offset[m];
    for (const auto& sw : skins[m]) {
      const int i = sw.node;
      const Vec3& g = graph.nodes[i];
      Vec3 rotated = state.R[i] * (match.src - g);
      warped += sw.w * (rotated + g + state.t[i]);
      Mat3 dphi = -cw * sw.w * skew(rotated);
      Mat3 dt = cw * sw.w * Mat3::Identity();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          trip[at++] = {static_cast<int>(3 * m + r), 3 * i + c, dphi(r, c)};
          trip[at++] = {static_cast<int>(3 * m + r), 3 * nv + 3 * i + c, dt(r, c)};
        }
    }
    sys.r.segment<3>(3 * m) = cw * (warped - match.tgt);
  }

#pragma omp parallel for schedule(static)
  for (long long e = 0; e < ne; ++e) {
    const auto [i, j] = graph.edges[e];
    const int row = 3 * (nk + static_cast<int>(e));
    sys.r.segment<3>(row) = reg_residual(i, j, graph, state, config);
    Mat3 dphi = -sqrt_la * skew(state.R[i] * (graph.nodes[j] - graph.nodes[i]));
    long long at = offset[nk + e];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        trip[at++] = {row + r, 3 * i + c, dphi(r, c)};
        trip[at++] = {row + r, 3 * nv + 3 * i + c, r == c ? sqrt_la : 0.0};
        trip[at++] = {row + r, 3 * nv + 3 * j + c, r == c ? -sqrt_la : 0.0};
      }
  }

  sys.J.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

double energy(const DeformationGraph& graph, const GraphState& state,
              const std::vector<NicpMatch>& matches, const NicpConfig& config) {
  double e_corr = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : e_corr)
  for (long long m = 0; m < static_cast<long long>(matches.size()); ++m) {
    double c = matches[m].confidence;
    e_corr += c * c * (warp_point(matches[m].src, graph, state) - matches[m].tgt).squaredNorm();
  }
  double e_reg = 0.0;
  for (const auto& [i, j] : graph.edges) {
    const Vec3 &gi = graph.nodes[i], &gj = graph.nodes[j];
    e_reg += (state.R[i] * (gj - gi) + gi + state.t[i] - (gj + state.t[j])).squaredNorm();
  }
  return config.lambda_c * e_corr + config.lambda_a * e_reg;
}

std::string NicpResult::trace_json() const {
  std::ostringstream os;
  for (const auto& rec : trace) {
    nlohmann::json j{{"iteration", rec.iteration},
                     {"energy", rec.energy},
                     {"step_norm", rec.step_norm},
                     {"damping", rec.damping}};
    os << j.dump() << "\n";
  }
  return os.str();
}

namespace {

// (J^T J + mu I) x = -J^T r. Returns false when the factorization fails.
bool solve_normal_equations(const Eigen::SparseMatrix<double>& J, const Eigen::VectorXd& r,
                            double mu, int nv, Eigen::VectorXd& out) {
  Eigen::SparseMatrix<double> JtJ = Eigen::SparseMatrix<double>(J.transpose()) * J;
  Eigen::VectorXd rhs = -J.transpose() * r;
  for (int i = 0; i < JtJ.rows(); ++i) JtJ.coeffRef(i, i) += mu;
  if (nv <= 1500) {
    Eigen::MatrixXd dense(JtJ);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
    out = lu.solve(rhs);
  } else {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(JtJ);
    if (lu.info() != Eigen::Success) return false;
    out = lu.solve(rhs);
  }
  return out.allFinite();
}

}  // namespace

NicpResult gauss_newton_solve(const DeformationGraph& graph, const GraphState& initial_state,
                              const std::vector<NicpMatch>& matches, const NicpConfig& config) {
  config.validate();
  if (matches.empty()) throw ValidationError("no correspondences for non-rigid solve");
  if (graph.nodes.empty()) throw ValidationError("empty deformation graph");

  NicpResult result;
  result.state = initial_state;
  const int nv = static_cast<int>(graph.nodes.size());
  double mu = config.lm_damping;
  double current_energy = energy(graph, result.state, matches, config);
  result.trace.push_back({0, current_energy, 0.0, mu, true});

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    AssembledSystem sys = assemble(graph, result.state, matches, config);
    bool accepted = false;
    Eigen::VectorXd delta;
    double new_energy = current_energy;
    GraphState candidate = result.state;
    while (!accepted) {
      if (!solve_normal_equations(sys.J, sys.r, mu, nv, delta)) {
        mu = mu == 0.0 ? 1e-8 : mu * 10.0;
        if (mu > 1e12) throw NumericalError("underdetermined system");
        continue;
      }
      candidate = apply_update(result.state, delta);
      new_energy = energy(graph, candidate, matches, config);
      if (new_energy <= current_energy) {
        accepted = true;
      } else {
        mu = mu == 0.0 ? 1e-8 : mu * 10.0;
        if (mu > 1e12) return result;  // no descending step remains
      }
    }
    double step = delta.lpNorm<Eigen::Infinity>();
    result.state = candidate;
    result.trace.push_back({iter, new_energy, step, mu, true});
    double rel_decrease =
        current_energy > 0.0 ? (current_energy - new_energy) / current_energy : 0.0;
    current_energy = new_energy;
    mu *= 0.5;
    if (step < config.step_tol) break;
    if (rel_decrease >= 0.0 && rel_decrease < config.energy_tol) break;
  }
  return result;
}

}  // namespace pcm
