#include <benchmark/benchmark.h>

#include <random>

#include "eegstack/features.hpp"
#include "eegstack/trialset.hpp"

using namespace eegstack;

static std::vector<double> noise(std::size_t n) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x) v = nd(gen);
  return x;
}

static void BM_Td(benchmark::State& state) {
  const auto x = noise(640);
  for (auto _ : state) benchmark::DoNotOptimize(extract_td(x, 256.0));
}
BENCHMARK(BM_Td);

static void BM_Fd(benchmark::State& state) {
  const auto x = noise(640);
  for (auto _ : state) benchmark::DoNotOptimize(extract_fd(x, 256.0));
}
BENCHMARK(BM_Fd);

static void BM_Tfd(benchmark::State& state) {
  const auto x = noise(640);
  for (auto _ : state) benchmark::DoNotOptimize(extract_tfd(x, 256.0));
}
BENCHMARK(BM_Tfd);

static void BM_Matrix(benchmark::State& state) {
  SyntheticConfig cfg;
  cfg.n_trials = 40;
  const auto ts = generate_synthetic(cfg, 7).trials;
  for (auto _ : state) benchmark::DoNotOptimize(build_feature_matrix(ts).values.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.n_trials * cfg.n_channels));
}
BENCHMARK(BM_Matrix)->Unit(benchmark::kMillisecond);
