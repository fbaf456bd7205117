// Benchmarks the OpenMP kernels against their serial reference
// implementations: batch nearest neighbors, row-wise position encoding,
// dual softmax, and non-rigid system assembly.

#include "pcm/deform_graph.hpp"
#include "pcm/geometry.hpp"
#include "pcm/matching.hpp"
#include "pcm/nicp.hpp"
#include "pcm/rope.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace pcm;

namespace {

double seconds_of(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.4f s   parallel %8.4f s   speedup %5.2fx\n", name, serial,
              parallel, serial / parallel);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);

  {  // batch nearest neighbors
    PointCloud cloud, queries;
    for (int i = 0; i < 200000; ++i) cloud.emplace_back(u(rng), u(rng), u(rng));
    for (int i = 0; i < 50000; ++i) queries.emplace_back(u(rng), u(rng), u(rng));
    KdTree tree(cloud);
    // serial and parallel run the same tree queries so the ratio isolates OpenMP
    double ser = seconds_of([&] {
      std::vector<std::pair<int, double>> out(queries.size());
      for (size_t i = 0; i < queries.size(); ++i) out[i] = tree.nearest(queries[i]);
    });
    double par = seconds_of([&] { (void)batch_nearest_neighbors(queries, tree); });
    report("batch nearest neighbors", ser, par);
    // the brute-force test oracle, at a size where it finishes promptly
    PointCloud small_q(queries.begin(), queries.begin() + 2000);
    double brute = seconds_of([&] { (void)batch_nearest_neighbors_serial(small_q, cloud); }, 1);
    std::printf("%-28s brute oracle (2k queries) %8.4f s\n", "", brute);
  }

  {  // row-wise position encoding
    const int n = 20000, d = 528;
    EncodingConfig cfg{.d = d};
    Eigen::MatrixXd feats = Eigen::MatrixXd::Random(n, d);
    PointCloud pos;
    for (int i = 0; i < n; ++i) pos.emplace_back(u(rng), u(rng), u(rng));
    double ser = seconds_of([&] { (void)encode_rows_serial(feats, pos, cfg); });
    double par = seconds_of([&] { (void)encode_rows(feats, pos, cfg); });
    report("position encoding rows", ser, par);
  }

  {  // dual softmax
    Eigen::MatrixXd S = Eigen::MatrixXd::Random(3000, 3000);
    double ser = seconds_of([&] { (void)dual_softmax_serial(S); });
    double par = seconds_of([&] { (void)dual_softmax(S); });
    report("dual softmax 3000x3000", ser, par);
  }

  {  // non-rigid system assembly
    PointCloud patch;
    std::mt19937_64 rng2(2);
    std::uniform_real_distribution<double> up(0.0, 0.5);
    for (int i = 0; i < 30000; ++i) patch.emplace_back(up(rng2), up(rng2), 0.02 * up(rng2));
    GraphBuildConfig gb;
    gb.node_spacing = 0.02;
    gb.min_component_nodes = 0;
    DeformationGraph graph = build_graph(patch, gb);
    GraphState state = GraphState::identity(static_cast<int>(graph.nodes.size()));
    std::vector<NicpMatch> matches;
    for (int i = 0; i < 30000; i += 2)
      matches.push_back({patch[i], patch[i] + Vec3(0.01, 0, 0), 1.0});
    std::printf("graph: %zu nodes, %zu edges, %zu matches\n", graph.nodes.size(),
                graph.edges.size(), matches.size());
    NicpConfig nc;
    double par = seconds_of([&] { (void)assemble(graph, state, matches, nc); });
    std::printf("%-28s parallel %8.4f s\n", "nicp assemble", par);
  }

  return 0;
}
