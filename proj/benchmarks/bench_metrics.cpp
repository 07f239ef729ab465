#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "hcap/metrics.hpp"

using namespace hcap::metrics;

namespace {

std::vector<TimedText> sequence(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> words = {"the", "person", "in", "red", "walks", "left", "then",
                                                 "stands", "still", "looks", "around", "runs", "away"};
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<std::size_t> w(0, words.size() - 1), len(6, 14);
  std::vector<TimedText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 0.7 * u(rng);
    Tokens t(len(rng));
    for (auto& x : t) x = words[w(rng)];
    out.push_back({{s, s + 0.05 + 0.25 * u(rng)}, t});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.segment.start < b.segment.start; });
  return out;
}

void BM_MeteorLite(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto a = sequence(rng, 2);
  for (auto _ : state) benchmark::DoNotOptimize(meteor_lite(a[0].tokens, a[1].tokens));
}
BENCHMARK(BM_MeteorLite);

void BM_SodaC(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = sequence(rng, n), r = sequence(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(soda_c(p, r));
}
BENCHMARK(BM_SodaC)->Arg(4)->Arg(8)->Arg(16);

// Whole protocol on a corpus of videos with 6 persons each.
void BM_EvalProtocol(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<VideoEval> corpus;
  for (int v = 0; v < state.range(0); ++v)
    corpus.push_back({"v" + std::to_string(v), sequence(rng, 6), sequence(rng, 6)});
  for (auto _ : state) benchmark::DoNotOptimize(tiou_matched_eval(corpus));
}
BENCHMARK(BM_EvalProtocol)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
