#include "hcap/dataset.hpp"

#include <algorithm>

#include "hcap/error.hpp"
#include "hcap/features.hpp"

namespace hcap::dataset {

CorpusVideo load_video(const std::filesystem::path& dir, const std::string& id) {
  CorpusVideo v;
  v.annotation = annotation::read_annotation(dir / "annotations" / (id + ".json"));
  if (v.annotation.video_id != id) {
    throw FormatError(id + ".json: video_id is '" + v.annotation.video_id + "', expected '" + id + "'");
  }
  const auto feat = dir / "features";
  v.frames = features::read_features(feat / (id + ".frames.hcft"));
  v.persons = features::read_features(feat / (id + ".persons.hcft"));
  v.tracks = features::read_features(feat / (id + ".tracks.hcft"));
  const auto n = v.annotation.persons.size();
  if (v.persons.rows() != n || v.tracks.rows() != n || v.tracks.cols() != 2) {
    throw DimensionError(id + ": person features " + diff::shape_str(v.persons.shape()) + " and tracks " +
                         diff::shape_str(v.tracks.shape()) + " do not cover " + std::to_string(n) + " persons");
  }
  return v;
}

std::vector<CorpusVideo> load_corpus(const std::filesystem::path& dir, std::span<const std::string> ids) {
  std::vector<CorpusVideo> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(load_video(dir, id));
  return out;
}

text::Vocabulary build_vocabulary(std::span<const CorpusVideo> videos) {
  std::vector<std::string> captions;
  for (const auto& v : videos) {
    for (const auto& p : v.annotation.persons) captions.push_back(p.caption);
  }
  return text::Vocabulary::build(captions);
}

model::VideoInput to_input(const CorpusVideo& v) {
  model::VideoInput in;
  in.frames = v.frames;
  const auto c = v.persons.cols();
  const auto pd = v.persons.data();
  for (std::size_t i = 0; i < v.annotation.persons.size(); ++i) {
    model::PersonInput p;
    p.feature.assign(pd.begin() + static_cast<std::ptrdiff_t>(i * c), pd.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    p.track = {v.tracks.at(i, 0), v.tracks.at(i, 1)};
    p.person_index = v.annotation.persons[i].person_index;
    in.persons.push_back(std::move(p));
  }
  return in;
}

model::VideoTarget to_target(const CorpusVideo& v, const text::Vocabulary& vocab) {
  model::VideoTarget t;
  for (const auto& p : v.annotation.persons) {
    t.segments.push_back(annotation::normalized_extent(v.annotation, p));
    t.captions.push_back(vocab.encode(p.caption));
  }
  return t;
}

model::TrainingExample to_example(const CorpusVideo& v, const text::Vocabulary& vocab) {
  return {v.annotation.video_id, to_input(v), to_target(v, vocab)};
}

annotation::PredictionFile to_prediction_file(const annotation::VideoAnnotation& ann,
                                              std::span<const model::PersonPrediction> preds,
                                              const text::Vocabulary& vocab) {
  annotation::PredictionFile pf{ann.video_id, ann.duration_s, {}};
  for (const auto& p : preds) {
    pf.predictions.push_back({p.segment.start * ann.duration_s, p.segment.end * ann.duration_s, p.confidence,
                              vocab.decode(p.tokens)});
  }
  return pf;
}

metrics::VideoEval to_eval(const annotation::PredictionFile& preds, const annotation::VideoAnnotation& gt) {
  if (preds.video_id != gt.video_id) {
    throw ContractError("predictions for '" + preds.video_id + "' evaluated against '" + gt.video_id + "'");
  }
  metrics::VideoEval e;
  e.video_id = gt.video_id;
  const double d = gt.duration_s;
  for (const auto& p : preds.predictions) {
    e.predictions.push_back({{std::clamp(p.start_s / d, 0.0, 1.0), std::clamp(p.end_s / d, 0.0, 1.0)},
                             text::tokenize(p.caption)});
  }
  for (const auto& p : gt.persons) e.references.push_back({annotation::normalized_extent(gt, p), text::tokenize(p.caption)});
  return e;
}

}  // namespace hcap::dataset
