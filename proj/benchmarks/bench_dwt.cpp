#include <benchmark/benchmark.h>

#include <random>

#include "eegstack/signal_math.hpp"

using namespace eegstack;

static void BM_Dwt(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = nd(gen);
  const auto w = static_cast<Wavelet>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(dwt(x, w, 5));
  state.SetLabel(std::string(wavelet_name(w)));
}
BENCHMARK(BM_Dwt)->ArgsProduct({{640, 1152}, {0, 1, 2}});

static void BM_Roundtrip(benchmark::State& state) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  std::vector<double> x(1152);
  for (auto& v : x) v = nd(gen);
  for (auto _ : state) benchmark::DoNotOptimize(idwt(dwt(x, Wavelet::db4, 5)));
}
BENCHMARK(BM_Roundtrip);
