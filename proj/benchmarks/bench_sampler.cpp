// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "stgsnas/ops.hpp"
#include "stgsnas/sampler.hpp"

using namespace stgsnas;

namespace {

NoiseCursor fresh_cursor() { return NoiseCursor(SeededRng(1, stable_hash("bench"))); }

void BM_GumbelDraw(benchmark::State& state) {
  NoiseCursor c = fresh_cursor();
  for (auto _ : state) benchmark::DoNotOptimize(c.next_gumbel());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GumbelDraw);

void BM_GumbelMax(benchmark::State& state) {
  std::vector<double> theta(static_cast<std::size_t>(state.range(0)), 1.0);
  NoiseCursor c = fresh_cursor();
  for (auto _ : state) benchmark::DoNotOptimize(gumbel_max(theta, c));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GumbelMax)->Arg(2)->Arg(5)->Arg(8);

// Sample + backward of the M-sample straight-through average over 5 ops.
void BM_MultiSampleStgs(benchmark::State& state) {
  RelaxationConfig cfg;
  cfg.samples = static_cast<int>(state.range(0));
  Param phi("phi", ParamGroup::ArchGamma, Tensor::vector({0.1, -0.2, 0.3, 0.0, 0.5}));
  NoiseCursor c = fresh_cursor();
  const Tensor w = Tensor::vector({1, 2, 3, 4, 5});
  for (auto _ : state) {
    Tape tape;
    tape.backward(ad::dot(ad::multi_sample_average(tape.param(phi), cfg, c), tape.constant(w)));
  }
}
BENCHMARK(BM_MultiSampleStgs)->Arg(1)->Arg(15)->Arg(60);

}  // namespace

BENCHMARK_MAIN();
