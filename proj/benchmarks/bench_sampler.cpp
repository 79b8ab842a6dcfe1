#include <benchmark/benchmark.h>

#include "egdiff/sampler.hpp"

using namespace egdiff;

namespace {

const Schedule kSched;

void BM_Solver2ExactScore(benchmark::State& state) {
  const int steps = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  const EpsilonFn eps = [](const Eigen::MatrixXd& x, double t) {
    return Eigen::MatrixXd(kSched.alpha_sigma(t).second * x);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver2_sample_fn(kSched, eps, steps, n, 2, 5));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Solver2ExactScore)->Args({25, 4096})->Args({15, 256})
    ->Unit(benchmark::kMillisecond);

void BM_EulerExactScore(benchmark::State& state) {
  const int steps = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  const EpsilonFn eps = [](const Eigen::MatrixXd& x, double t) {
    return Eigen::MatrixXd(kSched.alpha_sigma(t).second * x);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(euler_sample_fn(kSched, eps, steps, n, 2, 5));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EulerExactScore)->Args({1000, 4096})->Unit(benchmark::kMillisecond);

void BM_InverseLogSnr(benchmark::State& state) {
  double lam = kSched.log_snr(0.37);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kSched.inverse_log_snr(lam));
  }
}
BENCHMARK(BM_InverseLogSnr);

}  // namespace
