#include <benchmark/benchmark.h>

#include "hcap/diff/nn.hpp"
#include "hcap/diff/ops.hpp"
#include "hcap/msdatt.hpp"

using namespace hcap;

namespace {

struct Setup {
  diff::ParameterSet params;
  msdatt::MultiScaleDeformableAttention attn;
  msdatt::FeaturePyramid pyramid;
  diff::Tensor queries, refs;

  Setup(std::size_t d, std::size_t frames, std::size_t nq) {
    diff::Rng rng(1);
    attn = msdatt::MultiScaleDeformableAttention(params, "attn", {d, 8, 4, 4}, rng);
    pyramid = msdatt::build_pyramid(diff::normal({frames, d}, 1.0, rng), 4);
    queries = diff::normal({nq, d}, 1.0, rng);
    refs = diff::uniform({nq, 1}, 0.0, 1.0, rng);
  }
};

// Arguments: d_model, frames, queries.
void BM_MsdattForward(benchmark::State& state) {
  Setup s(state.range(0), state.range(1), state.range(2));
  diff::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(s.attn(s.queries, s.refs, s.pyramid));
}
BENCHMARK(BM_MsdattForward)->Args({64, 64, 8})->Args({256, 64, 8})->Args({256, 256, 32});

void BM_MsdattForwardBackward(benchmark::State& state) {
  Setup s(state.range(0), state.range(1), state.range(2));
  for (auto _ : state) {
    diff::Tape tape;
    diff::TapeScope scope(tape);
    const auto loss = diff::sum(s.attn(s.queries, s.refs, s.pyramid));
    tape.backward(loss);
  }
}
BENCHMARK(BM_MsdattForwardBackward)->Args({64, 64, 8})->Args({256, 64, 8});

}  // namespace
