#include <benchmark/benchmark.h>

#include "egdiff/bench2d.hpp"
#include "egdiff/oracle.hpp"

using namespace egdiff;

namespace {

void BM_PosteriorEnergy(benchmark::State& state) {
  const int atoms = static_cast<int>(state.range(0));
  const Dataset2D ds = make_dataset("8gaussians", atoms, 7);
  const EmpiricalOracle oracle(EmpiricalPrior{ds.points},
                               builtin_energy("linear", 2.0), Schedule());
  Eigen::Vector2d x(0.5, -1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.posterior_energy(x, 0.3));
  }
  state.SetItemsProcessed(state.iterations() * atoms);
}
BENCHMARK(BM_PosteriorEnergy)->Arg(1000)->Arg(100000);

void BM_PosteriorGuidance(benchmark::State& state) {
  const int atoms = static_cast<int>(state.range(0));
  const Dataset2D ds = make_dataset("8gaussians", atoms, 7);
  const EmpiricalOracle oracle(EmpiricalPrior{ds.points},
                               builtin_energy("linear", 2.0), Schedule());
  Eigen::Vector2d x(0.5, -1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.posterior_guidance(x, 0.3));
  }
  state.SetItemsProcessed(state.iterations() * atoms);
}
BENCHMARK(BM_PosteriorGuidance)->Arg(1000)->Arg(100000);

void BM_Mmd2(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dataset2D a = make_dataset("8gaussians", n, 3);
  const Dataset2D b = make_dataset("8gaussians", n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmd2(a.points, b.points, 1.0));
  }
}
BENCHMARK(BM_Mmd2)->Arg(512)->Arg(4096)->Unit(benchmark::kMillisecond);

}  // namespace
