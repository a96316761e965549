#include <benchmark/benchmark.h>

#include <random>

#include "eegstack/models.hpp"

using namespace eegstack;

static void fixture(Eigen::Index n, Eigen::Index p, Eigen::MatrixXd& x, std::vector<int>& y) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  x.resize(n, p);
  y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(i % 4);
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = nd(gen) + (j % 4 == i % 4 ? 0.7 : 0.0);
  }
}

static void BM_LogReg(benchmark::State& state) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  fixture(144, state.range(0), x, y);
  for (auto _ : state) benchmark::DoNotOptimize(logreg_train(x, y, 4).weights.data());
}
BENCHMARK(BM_LogReg)->Arg(12)->Arg(100)->Arg(590)->Unit(benchmark::kMillisecond);

static void BM_Ensemble(benchmark::State& state) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  fixture(144, state.range(0), x, y);
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_train(x, y, 4).meta.weights.data());
}
BENCHMARK(BM_Ensemble)->Arg(12)->Arg(100)->Unit(benchmark::kMillisecond);
