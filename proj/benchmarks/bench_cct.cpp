#include <benchmark/benchmark.h>

#include <vector>

#include "spoofdet/models.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"

using namespace spoofdet;

namespace {

Tensor random_batch(std::size_t batch, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(batch * side * side);
  for (auto& x : v) x = rng.next_unit();
  return Tensor::from_values({batch, 1, side, side}, std::move(v));
}

}  // namespace

static void BM_CctDeskForward(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  CctConfig config = CctConfig::desk_preset();
  CctModel model = init_cct(config, Rng(42));
  Tensor x = random_batch(batch, config.input_side, 7);
  for (auto _ : state) {
    Tensor logits = cct_forward(x, model);
    benchmark::DoNotOptimize(logits.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_CctDeskForward)->Arg(1)->Arg(8);

// One optimizer-facing step: mount on a tape, forward, loss, backward.
static void BM_CctDeskTrainStep(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  CctConfig config = CctConfig::desk_preset();
  CctModel model = init_cct(config, Rng(42));
  Tensor x = random_batch(batch, config.input_side, 8);
  std::vector<int> labels(batch, 1);
  for (auto _ : state) {
    Tape tape;
    CctModel live = mount(model, tape);
    Tensor loss = cross_entropy(cct_forward(x, live), labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_CctDeskTrainStep)->Arg(1)->Arg(8);

static void BM_CctPaperForward(benchmark::State& state) {
  CctConfig config = CctConfig::paper_preset();
  CctModel model = init_cct(config, Rng(42));
  Tensor x = random_batch(1, config.input_side, 9);
  for (auto _ : state) {
    Tensor logits = cct_forward(x, model);
    benchmark::DoNotOptimize(logits.values().data());
  }
}
BENCHMARK(BM_CctPaperForward);

BENCHMARK_MAIN();
