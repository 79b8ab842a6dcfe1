#include <benchmark/benchmark.h>

#include <random>

#include "egdiff/net.hpp"

using namespace egdiff;

namespace {

NetworkSpec spec_for(int width) {
  NetworkSpec spec;
  spec.input_dim = 2;
  spec.output_dim = 2;
  spec.hidden = {width, width, width};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 16;
  return spec;
}

Eigen::MatrixXd random_batch(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

void BM_ForwardBatch(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  const Network net = init_network(spec_for(width), 1);
  const Eigen::MatrixXd x = random_batch(batch, 2, 2);
  const Eigen::VectorXd t = Eigen::VectorXd::Constant(batch, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_batch(net, x, t));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBatch)->Args({128, 256})->Args({128, 4096})->Args({512, 256});

void BM_ForwardBackward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  const Network net = init_network(spec_for(width), 1);
  const Eigen::MatrixXd x = random_batch(batch, 2, 2);
  const Eigen::MatrixXd dy = random_batch(batch, 2, 3);
  const Eigen::VectorXd t = Eigen::VectorXd::Constant(batch, 0.5);
  for (auto _ : state) {
    ForwardTrace trace;
    forward_batch(net, x, t, {}, &trace);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.params.size());
    benchmark::DoNotOptimize(backward_batch(net, trace, dy, grad));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Args({128, 256})->Args({128, 4096});

void BM_GradInputBatch(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  NetworkSpec spec = spec_for(128);
  spec.output_dim = 1;
  const Network net = init_network(spec, 1);
  const Eigen::MatrixXd x = random_batch(batch, 2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_input_batch(net, x, 0.5));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_GradInputBatch)->Arg(256)->Arg(4096);

}  // namespace
