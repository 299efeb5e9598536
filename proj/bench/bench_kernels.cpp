// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <numeric>

#include "rewirenet/curvature.hpp"
#include "rewirenet/synth.hpp"
#include "rewirenet/training.hpp"

using namespace rewirenet;

namespace {

Trajectory grid(int side, int steps) {
  SynthConfig c;
  c.rows = side;
  c.cols = side;
  c.steps = steps;
  return gen_synthetic(c);
}

void BM_EdgeCurvatures(benchmark::State& state) {
  const auto t = grid(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(edge_curvatures(t.graph));
}

void BM_EdgeCurvaturesSerial(benchmark::State& state) {
  const auto t = grid(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(edge_curvatures_serial(t.graph));
}

struct BatchFixture {
  std::vector<Trajectory> trajs;
  std::vector<Sample> samples;
  ProcessorParams params;
  std::vector<std::size_t> indices;

  explicit BatchFixture(int batch) : trajs{grid(12, batch)} {
    RewireParams rewire;
    rewire.layers = 4;
    samples = make_samples(trajs, rewire);
    ModelConfig mc;
    mc.layers = 4;
    mc.hidden_dim = 16;
    params = init_params(mc, 0);
    fit_normalization(params, samples);
    indices.resize(samples.size());
    std::iota(indices.begin(), indices.end(), 0);
  }
};

void BM_BatchLossAndGrad(benchmark::State& state) {
  const BatchFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grad(f.params, f.samples, f.indices));
}

void BM_BatchLossAndGradSerial(benchmark::State& state) {
  const BatchFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grad_serial(f.params, f.samples, f.indices));
}

}  // namespace

BENCHMARK(BM_EdgeCurvatures)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EdgeCurvaturesSerial)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchLossAndGrad)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchLossAndGradSerial)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
