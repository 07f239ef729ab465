#include <benchmark/benchmark.h>

#include "hcap/dataset.hpp"
#include "hcap/model.hpp"
#include "hcap/synth.hpp"

using namespace hcap;

namespace {

// One optimizer step on a synthetic video with the desk preset.
void BM_TrainStepDesk(benchmark::State& state) {
  synth::SynthConfig sc;
  sc.videos = 1;
  const auto videos = synth::generate(sc);
  std::vector<dataset::CorpusVideo> corpus;
  for (const auto& v : videos) corpus.push_back({v.annotation, v.frames, v.persons, v.tracks});
  const auto vocab = dataset::build_vocabulary(corpus);
  std::vector<model::TrainingExample> examples{dataset::to_example(corpus[0], vocab)};
  auto cfg = model::ModelConfig::desk();
  cfg.vocab_size = vocab.size();
  model::CaptionModel m(cfg, 1);
  model::TrainConfig tc;
  tc.steps = 1;
  tc.checked = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(model::train(m, examples, tc));
}
BENCHMARK(BM_TrainStepDesk)->ArgName("checked")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_InferDesk(benchmark::State& state) {
  synth::SynthConfig sc;
  sc.videos = 1;
  const auto videos = synth::generate(sc);
  const dataset::CorpusVideo v{videos[0].annotation, videos[0].frames, videos[0].persons, videos[0].tracks};
  const auto vocab = dataset::build_vocabulary(std::vector<dataset::CorpusVideo>{v});
  auto cfg = model::ModelConfig::desk();
  cfg.vocab_size = vocab.size();
  const model::CaptionModel m(cfg, 1);
  const auto input = dataset::to_input(v);
  for (auto _ : state) benchmark::DoNotOptimize(m.infer(input, true));
}
BENCHMARK(BM_InferDesk)->Unit(benchmark::kMillisecond);

}  // namespace
