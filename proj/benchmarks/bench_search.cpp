// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "stgsnas/oracle.hpp"
#include "stgsnas/trainer.hpp"

using namespace stgsnas;

namespace {

SpaceConfig tiny_space() {
  SpaceConfig c;
  c.num_image_features = 1;
  c.num_speech_features = 1;
  c.num_cells = 1;
  c.feature_width = 8;
  return c;
}

SyntheticSplits tiny_task() {
  PlantedTaskSpec spec;
  spec.num_image_features = 1;
  spec.num_speech_features = 1;
  spec.width = 8;
  spec.n_train = 512;
  spec.n_val = 512;
  spec.n_test = 64;
  return generate(spec, 1);
}

// One search epoch: weight pass, architecture pass, derivation and scoring.
void BM_SearchEpoch(benchmark::State& state) {
  const auto data = tiny_task();
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 16;
  cfg.relaxation.samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    SuperNet net(tiny_space(), 1);
    benchmark::DoNotOptimize(search(net, data.train, data.val, cfg).best_val_acc);
  }
}
BENCHMARK(BM_SearchEpoch)->Arg(1)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_RetrainOneArch(benchmark::State& state) {
  const auto data = tiny_task();
  const DerivedArch arch = enumerate_space(tiny_space()).back();
  RetrainConfig rc;
  rc.epochs = 5;
  rc.patience = 0;
  for (auto _ : state) benchmark::DoNotOptimize(retrain(arch, data.train, data.val, rc).val_accuracy);
}
BENCHMARK(BM_RetrainOneArch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
