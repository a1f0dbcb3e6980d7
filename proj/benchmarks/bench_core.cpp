#include <benchmark/benchmark.h>

#include "relux/distance.hpp"
#include "relux/extraction.hpp"
#include "relux/network.hpp"
#include "relux/oracle.hpp"
#include "relux/regression.hpp"
#include "relux/rng.hpp"

namespace {

using namespace relux;

Network make_net(int dim, int k, uint64_t seed) {
  Rng rng(seed);
  Network net;
  net.dim = dim;
  for (int i = 0; i < k; ++i) {
    Neuron n;
    n.sign = rng.sign();
    n.w = rng.normal_vector(dim);
    n.bias = rng.normal();
    net.neurons.push_back(std::move(n));
  }
  return net;
}

void BM_Evaluate(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const Network net = make_net(dim, 8, 1);
  Rng rng(2);
  const Vec x = rng.normal_vector(dim);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(net, x));
}
BENCHMARK(BM_Evaluate)->Arg(8)->Arg(64)->Arg(256);

void BM_L2DistanceMc(benchmark::State& state) {
  const Network a = make_net(8, 4, 3);
  const Network b = make_net(8, 4, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        l2_distance_mc(a, b, state.range(0), 5).estimate);
}
BENCHMARK(BM_L2DistanceMc)->Arg(1000)->Arg(10000);

void BM_GetGradient(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  InProcessOracle oracle(make_net(dim, 8, 6));
  Rng rng(7);
  const Vec x = 3.0 * rng.normal_vector(dim);
  uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(get_gradient(oracle, x, 1e-4, seed++));
}
BENCHMARK(BM_GetGradient)->Arg(8)->Arg(32);

void BM_ConstrainedLeastSquares(benchmark::State& state) {
  Rng rng(8);
  const int p = static_cast<int>(state.range(0));
  std::vector<FeatureSample> samples;
  for (int i = 0; i < 10 * p; ++i) {
    FeatureSample s;
    s.z = rng.normal_vector(p);
    s.y = rng.normal();
    samples.push_back(std::move(s));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(constrained_least_squares(samples, 1.0, 1e-10));
}
BENCHMARK(BM_ConstrainedLeastSquares)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
