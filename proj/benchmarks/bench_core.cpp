#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "dfx/loss.hpp"
#include "dfx/models.hpp"
#include "dfx/rng.hpp"
#include "dfx/sampler.hpp"

namespace {

using namespace dfx;

void BM_ClippedPointLoss(benchmark::State& state) {
  LossSpec spec;
  spec.kind = LossKind::ClippedRobust;
  spec.epsilon = 1e-10;
  spec.delta = 0.3872983346207417;
  double yhat = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(point_loss(spec, yhat, 2e-6));
    yhat *= 1.0000001;
  }
}
BENCHMARK(BM_ClippedPointLoss);

void BM_DiodeNewtonSolve(benchmark::State& state) {
  const DiodeParams p{.IS = 3e-23, .n = 1.1, .RS = 120.0};
  double v = 0.48;
  for (auto _ : state) {
    benchmark::DoNotOptimize(diode_current(p, v));
    v = v >= 2.0 ? 0.48 : v + 1e-4;
  }
}
BENCHMARK(BM_DiodeNewtonSolve);

void BM_ParzenPdf(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> points;
  for (std::size_t i = 0; i < n; ++i) points.push_back(rng.uniform());
  std::sort(points.begin(), points.end());
  const ParzenEstimator estimator(points, neighbor_bandwidths(points, 1e-3));
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimator.pdf(x));
    x += 1e-4;
    if (x > 1.0) x = 0.0;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ParzenPdf)->Arg(64)->Arg(512)->Arg(2048);

void BM_TpeSuggest(benchmark::State& state) {
  const auto n_trials = static_cast<std::size_t>(state.range(0));
  const auto dims = static_cast<std::size_t>(state.range(1));
  std::vector<ParamSpec> params;
  for (std::size_t d = 0; d < dims; ++d) {
    params.push_back({.name = "x" + std::to_string(d), .low = 0.0, .high = 1.0});
  }
  const SearchSpace space(params);
  Rng rng(3);
  std::vector<Trial> history;
  for (std::size_t i = 0; i < n_trials; ++i) {
    Trial t;
    t.index = i;
    t.params = random_suggest(space, rng);
    double s = 0.0;
    for (double v : t.params) s += (v - 0.3) * (v - 0.3);
    t.objective = s;
    t.status = TrialStatus::Ok;
    history.push_back(std::move(t));
  }
  TpeSampler sampler(space, SamplerConfig{}, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler.suggest(history));
  }
}
BENCHMARK(BM_TpeSuggest)->Args({200, 3})->Args({2000, 3})->Args({2000, 35});

void BM_SmallStudy(benchmark::State& state) {
  const SearchSpace space({{.name = "x", .low = 0.0, .high = 1.0},
                           {.name = "y", .low = 0.0, .high = 1.0}});
  const ObjectiveFn objective = [](std::size_t, std::span<const double> p) {
    return (p[0] - 0.3) * (p[0] - 0.3) + (p[1] - 0.7) * (p[1] - 0.7);
  };
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_study(objective, space, 100, ++seed, SamplerConfig{}));
  }
}
BENCHMARK(BM_SmallStudy);

}  // namespace

BENCHMARK_MAIN();
