#include <benchmark/benchmark.h>

#include <random>

#include "eegstack/signal_math.hpp"

using namespace eegstack;

static void BM_Dft(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  std::vector<Complex> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = {nd(gen), nd(gen)};
  for (auto _ : state) benchmark::DoNotOptimize(dft(x));
  state.SetComplexityN(state.range(0));
}
// Powers of two take the radix-2 path, the rest go through Bluestein.
BENCHMARK(BM_Dft)->Arg(256)->Arg(640)->Arg(1024)->Arg(1152)->Arg(4096);

static void BM_Psd(benchmark::State& state) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = nd(gen);
  for (auto _ : state) benchmark::DoNotOptimize(psd(x, 256.0));
}
BENCHMARK(BM_Psd)->Arg(640)->Arg(1152);
