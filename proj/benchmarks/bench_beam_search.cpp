#include <benchmark/benchmark.h>

#include "otm/beam_search.hpp"
#include "otm/toy_oracle.hpp"

namespace {

void BM_BeamSearch(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const otm::Tree tree = otm::Tree::build_random(m, 2, 1);
  const auto params = otm::LinearScorerParams::initialized(tree, 10, 2, 1.0);
  const otm::NodeScorer scorer(tree, params, otm::ProbabilityModel::Direct);
  otm::Rng rng(3);
  std::vector<double> x(10);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(otm::beam_search(scorer, x, k));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BeamSearch)->Args({1000, 1})->Args({1000, 50})->Args({100000, 50});

void BM_FitDirEstLimit(benchmark::State& state) {
  const otm::Tree tree = otm::Tree::build_random(1000, 2, 1);
  const auto eta = otm::gen_toy(1000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(otm::fit_direst(tree, eta));
}
BENCHMARK(BM_FitDirEstLimit);

}  // namespace

BENCHMARK_MAIN();
