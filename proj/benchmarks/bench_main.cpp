#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "trendwatch/local_regression.hpp"
#include "trendwatch/smoother.hpp"
#include "trendwatch/soft_dtw.hpp"
#include "trendwatch/synthetic.hpp"

using namespace trendwatch;

namespace {

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> x(n);
  double level = 0.0;
  for (auto& v : x) v = level += step(rng);
  return x;
}

std::vector<double> poisson_counts(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t)
    y[t] = std::poisson_distribution<long>(80.0 * std::exp(0.02 * static_cast<double>(t)))(rng);
  return y;
}

void BM_SoftDtw(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_walk(n, 1), b = random_walk(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(soft_dtw(a, b, 1.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SoftDtw)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNSquared);

void BM_FitPoisson(benchmark::State& state) {
  const auto y = poisson_counts(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fit_poisson(y).beta_hat);
}
BENCHMARK(BM_FitPoisson)->Arg(7)->Arg(21)->Arg(35);

void BM_FitNegbin(benchmark::State& state) {
  const auto y = poisson_counts(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(fit_negbin(y).beta_hat);
}
BENCHMARK(BM_FitNegbin)->Arg(7)->Arg(21)->Arg(35);

void BM_Smoother(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> y(n);
  std::mt19937_64 rng(5);
  for (std::size_t t = 0; t < n; ++t) {
    const double x = (static_cast<double>(t) - n / 2.0) / (n / 2.0);
    y[t] = std::poisson_distribution<long>(std::exp(4.0 + 1.0 - x * x))(rng);
  }
  SmoothConfig config;
  config.penalty = state.range(1) ? PenaltyKind::l1 : PenaltyKind::l2;
  const SeriesSpec spec{"x", DailySeries(Date::from_ymd(2021, 1, 4), y), SmoothModel::poisson, true};
  for (auto _ : state) benchmark::DoNotOptimize(smooth_univariate(spec, config).log_phi.back());
}
BENCHMARK(BM_Smoother)->ArgsProduct({{180, 540}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_RollingFit(benchmark::State& state) {
  ClusteredScenarioOptions o;
  o.n_regions = 1;
  o.n_clusters = 1;
  const auto syn = generate_panel(clustered_scenario(o));
  const auto model = static_cast<RegressionModel>(state.range(0));
  const auto region = *syn.panel.regions().begin();
  for (auto _ : state) benchmark::DoNotOptimize(rolling_fit(syn.panel, region, "clean", 21, model).fits.size());
}
BENCHMARK(BM_RollingFit)
    ->Arg(static_cast<int>(RegressionModel::linear_log))
    ->Arg(static_cast<int>(RegressionModel::poisson))
    ->Arg(static_cast<int>(RegressionModel::negbin))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
