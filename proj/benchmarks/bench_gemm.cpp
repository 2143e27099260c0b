#include <benchmark/benchmark.h>

#include <vector>

#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"
#include "spoofdet/tensor.hpp"

using namespace spoofdet;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_uniform(-1.0, 1.0);
  return v;
}

}  // namespace

static void BM_MatMul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Tensor a = Tensor::from_values({n, n}, random_values(n * n, 10));
  Tensor b = Tensor::from_values({n, n}, random_values(n * n, 11));
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

static void BM_MatMulBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> va = random_values(n * n, 12);
  std::vector<double> vb = random_values(n * n, 13);
  for (auto _ : state) {
    Tape tape;
    Tensor a = tape.leaf({n, n}, va);
    Tensor b = tape.leaf({n, n}, vb);
    Tensor loss = sum(matmul(a, b));
    tape.backward(loss);
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(BM_MatMulBackward)->Arg(64)->Arg(128)->Arg(256);

// Second tokenizer stage of the desk preset: 32->64 maps on a 32x32 grid.
static void BM_Conv2dDesk(benchmark::State& state) {
  Tensor x = Tensor::from_values({32, 32, 32}, random_values(32 * 32 * 32, 14));
  Tensor w = Tensor::from_values({64, 32, 3, 3}, random_values(64 * 32 * 9, 15));
  Tensor bias = Tensor::from_values({64}, random_values(64, 16));
  for (auto _ : state) {
    Tensor y = conv2d(x, w, bias);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_Conv2dDesk);

BENCHMARK_MAIN();
