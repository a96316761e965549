#include <benchmark/benchmark.h>

#include <random>

#include "eegstack/selection.hpp"

using namespace eegstack;

static void fixture(Eigen::Index n, Eigen::Index p, Eigen::MatrixXd& x, std::vector<int>& y) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd;
  x.resize(n, p);
  y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(i % 4);
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = nd(gen) + (j % 16 == i % 4 ? 1.0 : 0.0);
  }
}

static void BM_MrmrFcq(benchmark::State& state) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  fixture(160, state.range(0), x, y);
  const auto k = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(mrmr_select(x, y, 4, k).order.data());
}
BENCHMARK(BM_MrmrFcq)->ArgsProduct({{1248, 4992}, {12, 100}})->Unit(benchmark::kMillisecond);

static void BM_Anova(benchmark::State& state) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  fixture(160, state.range(0), x, y);
  for (auto _ : state) benchmark::DoNotOptimize(rank_features(x, y, 4, RankMethod::anova_f).order.data());
}
BENCHMARK(BM_Anova)->Arg(1248)->Arg(4992);
