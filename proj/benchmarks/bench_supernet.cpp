// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "stgsnas/dataset.hpp"
#include "stgsnas/ops.hpp"
#include "stgsnas/search_space.hpp"

using namespace stgsnas;

namespace {

struct Fixture {
  SpaceConfig space;
  SyntheticSplits data;
  Tensor image, speech;
  std::vector<int> labels;

  Fixture(int width, int cells, std::size_t batch) {
    space.num_image_features = 2;
    space.num_speech_features = 2;
    space.num_cells = cells;
    space.feature_width = width;
    PlantedTaskSpec spec;
    spec.width = width;
    spec.n_train = batch;
    spec.n_val = 2;
    spec.n_test = 2;
    data = generate(spec, 1);
    std::vector<std::size_t> rows(batch);
    for (std::size_t i = 0; i < batch; ++i) rows[i] = i;
    data.train.gather(rows, image, speech, labels);
  }
};

void BM_SupernetForwardBackward(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), 2, 16);
  SuperNet net(f.space, 1);
  RelaxationConfig cfg;
  NoiseCursor c(SeededRng(1, stable_hash("bench")));
  for (auto _ : state) {
    Tape tape;
    tape.backward(ad::softmax_cross_entropy(net.forward(tape, f.image, f.speech, cfg, c), f.labels));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_SupernetForwardBackward)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SupernetEvalForward(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), 2, 256);
  SuperNet net(f.space, 1);
  RelaxationConfig cfg;
  cfg.mode = RelaxationMode::EvalDeterministic;
  NoiseCursor c(SeededRng(1, stable_hash("bench")));
  for (auto _ : state) {
    Tape tape;
    tape.set_trainable_groups({});
    benchmark::DoNotOptimize(net.forward(tape, f.image, f.speech, cfg, c).value());
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_SupernetEvalForward)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
