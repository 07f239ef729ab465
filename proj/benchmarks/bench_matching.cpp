#include <benchmark/benchmark.h>

#include <random>

#include "hcap/setcrit.hpp"

using namespace hcap::setcrit;

namespace {

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  CostMatrix c(n, n);
  for (auto& v : c.values) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(c));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(4, 128)->Complexity(benchmark::oNCubed);

void BM_MatchCost(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 0.5);
  std::vector<ScoredSegment> preds;
  std::vector<Segment> gts;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    preds.push_back({{a, a + 0.3}, 0.5});
    gts.push_back({b, b + 0.2});
  }
  for (auto _ : state) benchmark::DoNotOptimize(match_cost(preds, gts));
}
BENCHMARK(BM_MatchCost)->Arg(8)->Arg(64);

}  // namespace
