// Microbenchmarks for the hot paths: rate roots, kernel tables, path
// ensembles, the two functional evaluators, the ascent objective, and field
// sampling.  Run with --benchmark_min_time=... for tighter numbers.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "pamlab/field.hpp"
#include "pamlab/kernels.hpp"
#include "pamlab/montecarlo.hpp"
#include "pamlab/paths.hpp"
#include "pamlab/rates.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/variational.hpp"

using namespace pamlab;

namespace {

void BM_RateRoot(benchmark::State& state) {
  double n = 100.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambda_rate(n));
    n += 1.0;  // defeat caching across iterations
  }
}
BENCHMARK(BM_RateRoot);

void BM_KernelRadial(benchmark::State& state) {
  const StationaryKernel k = StationaryKernel::log_plus(1.0, 2).mollify(0.1);
  double r = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k.at_radius(r));
    r = r < 3.0 ? r + 1e-4 : 0.01;
  }
}
BENCHMARK(BM_KernelRadial);

void BM_RadialTableBuild(benchmark::State& state) {
  const StationaryKernel k = StationaryKernel::log_plus(1.0, 2).mollify(0.1);
  for (auto _ : state) {
    const RadialEvaluator table(k, 4.0, static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(table(1.0));
  }
}
BENCHMARK(BM_RadialTableBuild)->Arg(256)->Arg(1024);

void BM_RadialTableLookup(benchmark::State& state) {
  const StationaryKernel k = StationaryKernel::log_plus(1.0, 2).mollify(0.1);
  const RadialEvaluator table(k, 4.0, 1024);
  double r = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(table(r));
    r = r < 3.9 ? r + 1e-4 : 0.0;
  }
}
BENCHMARK(BM_RadialTableLookup);

void BM_BrownianEnsemble(benchmark::State& state) {
  const TimeGrid grid(1.0, 64);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const BrownianEnsemble e(static_cast<std::size_t>(state.range(0)), 2, grid,
                             {0.0, 0.0}, seed++);
    benchmark::DoNotOptimize(e.node(0, 64));
  }
}
BENCHMARK(BM_BrownianEnsemble)->Arg(2)->Arg(8);

void BM_PairwiseFunctional(benchmark::State& state) {
  const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
  const StationaryKernel k = StationaryKernel::log_plus(1.0, 2).mollify(0.1);
  const PairwiseFunctional f(k, 8.0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const BrownianEnsemble e(3, 2, grid, {0.0, 0.0}, seed++);
    benchmark::DoNotOptimize(f(e));
  }
}
BENCHMARK(BM_PairwiseFunctional)->Arg(32)->Arg(128);

void BM_SpectralFunctional(benchmark::State& state) {
  const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
  const StationaryKernel k = StationaryKernel::cosine_atoms(
      {0.4, 0.3, 0.2}, {{1.0, 0.0}, {0.5, 1.5}, {2.0, 2.0}}, 2);
  const PairwiseFunctional f(k, 8.0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const BrownianEnsemble e(3, 2, grid, {0.0, 0.0}, seed++);
    benchmark::DoNotOptimize(f(e));
  }
}
BENCHMARK(BM_SpectralFunctional)->Arg(32)->Arg(128);

void BM_ExpMoment(benchmark::State& state) {
  const StationaryKernel k = StationaryKernel::trunc_power(2.0, 1.0, 1);
  ExpMomentConfig cfg{2, 1, TimeGrid(0.5, 16), 200, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(exp_moment(k, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_ExpMoment);

void BM_VariationalEnergy(benchmark::State& state) {
  const GridSpec grid(2, static_cast<std::size_t>(state.range(0)), 0.1);
  const VariationalProblem p(StationaryKernel::trunc_power(2.0, 1.0, 2), grid);
  std::vector<double> g(grid.size(), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.energy(g));
  }
}
BENCHMARK(BM_VariationalEnergy)->Arg(32)->Arg(64);

void BM_VariationalGradient(benchmark::State& state) {
  const GridSpec grid(2, 64, 0.1);
  const VariationalProblem p(StationaryKernel::trunc_power(2.0, 1.0, 2), grid);
  std::vector<double> g(grid.size(), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.gradient(g));
  }
}
BENCHMARK(BM_VariationalGradient);

void BM_CovarianceBuild(benchmark::State& state) {
  const CovarianceKernel cov(1.0, 1);
  const FieldBox box(1, {0.0}, 2.0, 4.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_mollified_covariance(cov, 0.1, box));
  }
}
BENCHMARK(BM_CovarianceBuild)->Arg(32)->Arg(64);

void BM_SampleField(benchmark::State& state) {
  const CovarianceKernel cov(1.0, 1);
  const FieldBox box(1, {0.0}, 2.0, 0.05);
  const MollifiedCovariance mc = build_mollified_covariance(cov, 0.1, box);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_field(mc, seed++));
  }
}
BENCHMARK(BM_SampleField);

}  // namespace

BENCHMARK_MAIN();
