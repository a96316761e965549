#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eegstack/preprocess.hpp"

using namespace eegstack;

static void BM_Vmd(benchmark::State& state) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / 256.0;
    x[i] = std::sin(2.0 * std::numbers::pi * 10.0 * t) + std::sin(2.0 * std::numbers::pi * 0.2 * t) + 0.3 * nd(gen);
  }
  VmdParams p;
  p.modes = static_cast<int>(state.range(1));
  int iters = 0;
  for (auto _ : state) {
    const auto r = vmd(x, p, 256.0);
    iters = r.iterations;
    benchmark::DoNotOptimize(r.modes.data());
  }
  state.counters["iterations"] = iters;
}
BENCHMARK(BM_Vmd)->ArgsProduct({{512, 640, 1152}, {2, 6}})->Unit(benchmark::kMillisecond);
