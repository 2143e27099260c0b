#include <benchmark/benchmark.h>

#include <complex>
#include <vector>

#include "spoofdet/fft.hpp"
#include "spoofdet/rng.hpp"
#include "spoofdet/spectrogram.hpp"

using namespace spoofdet;

static void BM_FftTransform(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<std::complex<double>> frame(n);
  for (auto& c : frame) c = {rng.next_uniform(-1.0, 1.0), rng.next_uniform(-1.0, 1.0)};
  for (auto _ : state) {
    std::vector<std::complex<double>> data = frame;
    fft::transform(data);
    benchmark::DoNotOptimize(data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FftTransform)->Arg(256)->Arg(512)->Arg(2048)->Arg(8192);

static void BM_RealSpectrum512(benchmark::State& state) {
  Rng rng(2);
  std::vector<double> frame(512);
  for (auto& v : frame) v = rng.next_uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto bins = fft::real_spectrum(frame);
    benchmark::DoNotOptimize(bins.data());
  }
}
BENCHMARK(BM_RealSpectrum512);

// Whole featurization of a two-second 16 kHz clip (the training-data shape).
static void BM_Featurize2s(benchmark::State& state) {
  Rng rng(3);
  AudioSignal signal;
  signal.samples.resize(32000);
  for (auto& v : signal.samples) v = rng.next_uniform(-0.8, 0.8);
  for (auto _ : state) {
    Spectrogram s = featurize(signal);
    benchmark::DoNotOptimize(s.v.data());
  }
}
BENCHMARK(BM_Featurize2s);

BENCHMARK_MAIN();
