// Throughput of the hot paths: crossbar reads, GP fitting and posterior,
// NSGA-II, hypervolume and the acquisition's entropy term.
#include <benchmark/benchmark.h>

#include <random>

#include "cfmesmo/crossbar.hpp"
#include "cfmesmo/gp.hpp"
#include "cfmesmo/mesmo.hpp"
#include "cfmesmo/objectives.hpp"
#include "cfmesmo/pareto.hpp"

using namespace cfmesmo;

namespace {

Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(gen);
  return m;
}

void BM_CrossbarMvm(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  ReramDesign d;
  d.res_cell = static_cast<int>(state.range(1));
  MappedLayer layer = MappedLayer::map(quantize(uniform(n, n, 1, -1, 1), 8), d);
  Rng rng = make_stream(2, {});
  layer.program(rng, NoiseSources::all());
  const QuantizedMatrix x = quantize(uniform(32, n, 3, -1, 1), 8);
  const ReadSettings read = ReadSettings::at_design(d, NoiseSources::all());
  for (auto _ : state) benchmark::DoNotOptimize(layer.mvm(x, rng, read));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_CrossbarMvm)->Args({64, 2})->Args({64, 8})->Args({256, 2})->Unit(benchmark::kMicrosecond);

void BM_GpFit(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Eigen::MatrixXd x = uniform(n, 2, 4);
  const Eigen::VectorXd z = uniform(n, 1, 5).col(0);
  BraninCurrinCf problem;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = problem.at_fidelity(x.row(i).transpose(), z[i], z[i])[0];
  for (auto _ : state) benchmark::DoNotOptimize(CfGpModel::fit(x, z, y));
}
BENCHMARK(BM_GpFit)->Arg(20)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_GpPosterior(benchmark::State& state) {
  const Eigen::MatrixXd x = uniform(60, 2, 6);
  const Eigen::VectorXd y = uniform(60, 1, 7).col(0);
  const CfGpModel m = CfGpModel::with_hyperparameters(x, Eigen::VectorXd::Ones(60), y,
                                                      {1.0, Eigen::Vector3d(0.3, 0.3, 0.5), 1e-4});
  const Eigen::MatrixXd q = uniform(2000, 2, 8);
  Eigen::VectorXd mean, std;
  for (auto _ : state) {
    m.posterior(q, 1.0, mean, std);
    benchmark::DoNotOptimize(mean.data());
  }
  state.SetItemsProcessed(state.iterations() * q.rows());
}
BENCHMARK(BM_GpPosterior)->Unit(benchmark::kMicrosecond);

void BM_Nsga2Zdt1(benchmark::State& state) {
  Zdt1Cf problem(30);
  const BatchObjective f = [&problem](const Eigen::MatrixXd& xs) {
    Eigen::MatrixXd out(xs.rows(), 2);
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out.row(i) = problem.exact(xs.row(i).transpose()).transpose();
    return out;
  };
  const Nsga2Config cfg{100, static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(nsga2(f, Bounds::unit(30), cfg, 1));
}
BENCHMARK(BM_Nsga2Zdt1)->Arg(50)->Arg(250)->Unit(benchmark::kMillisecond);

void BM_Hypervolume(benchmark::State& state) {
  const auto k = static_cast<Eigen::Index>(state.range(0));
  const auto n = static_cast<Eigen::Index>(state.range(1));
  // points on the positive unit sphere are mutually non-dominated
  Eigen::MatrixXd pts = uniform(n, k, 9, 0.05, 1.0);
  pts = pts.rowwise().normalized();
  const Eigen::VectorXd ref = Eigen::VectorXd::Zero(k);
  for (auto _ : state) benchmark::DoNotOptimize(hypervolume(pts, ref));
}
BENCHMARK(BM_Hypervolume)->Args({2, 100})->Args({3, 50})->Args({4, 30})->Unit(benchmark::kMicrosecond);

void BM_EntropyTerm(benchmark::State& state) {
  const Eigen::VectorXd g = uniform(1024, 1, 10, -12.0, 8.0).col(0);
  for (auto _ : state) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) s += entropy_term(g[i]);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * g.size());
}
BENCHMARK(BM_EntropyTerm);

}  // namespace

BENCHMARK_MAIN();
