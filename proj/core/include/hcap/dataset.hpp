#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hcap/annotation.hpp"
#include "hcap/diff/tensor.hpp"
#include "hcap/metrics.hpp"
#include "hcap/model.hpp"
#include "hcap/text.hpp"

namespace hcap::dataset {

/// One video of an on-disk corpus (see synth::write_corpus for the layout).
struct CorpusVideo {
  annotation::VideoAnnotation annotation;
  diff::Tensor frames;   // [T x C]
  diff::Tensor persons;  // [N x C]
  diff::Tensor tracks;   // [N x 2], normalized tracker extents
};

CorpusVideo load_video(const std::filesystem::path& dir, const std::string& id);
std::vector<CorpusVideo> load_corpus(const std::filesystem::path& dir, std::span<const std::string> ids);

text::Vocabulary build_vocabulary(std::span<const CorpusVideo> videos);

model::VideoInput to_input(const CorpusVideo& v);
model::VideoTarget to_target(const CorpusVideo& v, const text::Vocabulary& vocab);
model::TrainingExample to_example(const CorpusVideo& v, const text::Vocabulary& vocab);

annotation::PredictionFile to_prediction_file(const annotation::VideoAnnotation& ann,
                                              std::span<const model::PersonPrediction> preds,
                                              const text::Vocabulary& vocab);

// Normalized-time view of predictions and references for the metrics.
metrics::VideoEval to_eval(const annotation::PredictionFile& preds, const annotation::VideoAnnotation& gt);

}  // namespace hcap::dataset
