#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <set>

#include "hcap/dataset.hpp"
#include "hcap/features.hpp"
#include "hcap/synth.hpp"
#include "hcap/text.hpp"

using namespace hcap;
namespace fs = std::filesystem;

namespace {

synth::SynthConfig small_config(std::uint64_t seed, std::size_t videos) {
  synth::SynthConfig c;
  c.seed = seed;
  c.videos = videos;
  c.feature_dim = 64;
  return c;
}

std::string fingerprint(const synth::SynthVideo& v) {
  return annotation::serialize(v.annotation) + features::encode_features(v.frames, features::Dtype::f64) +
         features::encode_features(v.persons, features::Dtype::f64) +
         features::encode_features(v.tracks, features::Dtype::f64);
}

}  // namespace

TEST_CASE("same seed, same corpus; other seed, other corpus") {
  const auto a = synth::generate(small_config(7, 5)), b = synth::generate(small_config(7, 5));
  const auto c = synth::generate(small_config(8, 5));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(fingerprint(a[i]) == fingerprint(b[i]));
    CHECK(fingerprint(a[i]) != fingerprint(c[i]));
  }
  // A video does not depend on how many others are generated.
  CHECK(fingerprint(synth::generate(small_config(7, 2))[1]) == fingerprint(a[1]));
}

TEST_CASE("generated annotations are valid and use the closed vocabulary") {
  auto cfg = small_config(3, 40);
  cfg.anomaly_fraction = 0.5;
  const auto vids = synth::generate(cfg);
  const auto vocab = synth::template_vocabulary();
  const std::set<std::string> words(vocab.begin(), vocab.end());
  std::size_t anomalies = 0;
  for (const auto& v : vids) {
    const auto diags = annotation::validate(v.annotation);
    CHECK_FALSE(annotation::has_errors(diags));
    const auto n = v.annotation.persons.size();
    CHECK(n >= cfg.min_persons);
    CHECK(n <= cfg.max_persons);
    CHECK(v.persons.rows() == n);
    CHECK(v.tracks.rows() == n);
    CHECK(v.frames.rows() == cfg.frame_rows);
    CHECK(v.frames.cols() == cfg.feature_dim);
    bool has_anomaly_phrase = false;
    for (const auto& p : v.annotation.persons) {
      for (const auto& w : text::tokenize(p.caption)) CHECK(words.count(w) == 1);
      for (const auto& ph : synth::anomaly_phrases()) has_anomaly_phrase |= p.caption.find(ph) != std::string::npos;
    }
    const bool anomaly = v.annotation.scene_label != "normal";
    anomalies += anomaly;
    CHECK(has_anomaly_phrase == anomaly);
  }
  CHECK(anomalies > 0);
}

TEST_CASE("a linear probe reads the active-person count off the frame features") {
  const auto vids = synth::generate(small_config(11, 50));
  std::vector<std::vector<double>> rows;
  std::vector<double> counts;
  std::vector<bool> held_out;
  for (std::size_t i = 0; i < vids.size(); ++i) {
    const auto& v = vids[i];
    const auto active = synth::active_per_row(v.annotation, v.frames.rows());
    const auto d = v.frames.data();
    const std::size_t c = v.frames.cols();
    for (std::size_t t = 0; t < active.size(); ++t) {
      rows.emplace_back(d.begin() + t * c, d.begin() + (t + 1) * c);
      counts.push_back(static_cast<double>(active[t]));
      held_out.push_back(i % 2 == 1);
    }
  }
  const std::size_t c = rows.front().size();
  std::size_t n_fit = 0;
  for (bool h : held_out) n_fit += !h;
  Eigen::MatrixXd X(n_fit, c + 1);
  Eigen::VectorXd y(n_fit);
  for (std::size_t r = 0, k = 0; r < rows.size(); ++r) {
    if (held_out[r]) continue;
    for (std::size_t j = 0; j < c; ++j) X(k, j) = rows[r][j];
    X(k, c) = 1.0;
    y(k++) = counts[r];
  }
  const Eigen::VectorXd w = X.colPivHouseholderQr().solve(y);
  std::size_t correct = 0, total = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!held_out[r]) continue;
    double pred = w(c);
    for (std::size_t j = 0; j < c; ++j) pred += w(j) * rows[r][j];
    correct += std::llround(pred) == std::llround(counts[r]);
    ++total;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  INFO("held-out probe accuracy " << acc);
  CHECK(acc >= 0.95);
}

TEST_CASE("split") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 100; ++i) ids.push_back(synth::video_id(i));
  const auto s = synth::split(ids, synth::kDefaultRatios, 4);
  CHECK(s.train.size() == 58);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 22);
  std::set<std::string> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
  CHECK(synth::split(ids, synth::kDefaultRatios, 4).train == s.train);
  CHECK(synth::split(ids, synth::kDefaultRatios, 5).train != s.train);

  std::vector<std::string> full;
  for (std::size_t i = 0; i < 1012; ++i) full.push_back(synth::video_id(i));
  const auto p = synth::split(full, synth::kDefaultRatios, 1);
  CHECK(p.train.size() == 584);
  CHECK(p.val.size() == 205);
  CHECK(p.test.size() == 223);
}

TEST_CASE("corpus on disk loads back into training examples") {
  const fs::path dir = fs::temp_directory_path() / "hcap_synth_test";
  fs::remove_all(dir);
  const auto vids = synth::generate(small_config(2, 6));
  std::vector<std::string> ids;
  for (const auto& v : vids) ids.push_back(v.annotation.video_id);
  const auto split = synth::split(ids, {0.5, 0.25, 0.25}, 2);
  synth::write_corpus(dir, vids, split);
  CHECK(synth::read_manifest(dir / "all.txt") == ids);
  CHECK(synth::read_manifest(dir / "train.txt") == split.train);

  const auto corpus = dataset::load_corpus(dir, ids);
  REQUIRE(corpus.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(corpus[i].annotation == vids[i].annotation);
    // Frames are stored as f32, and the generator already rounds to f32.
    CHECK(std::equal(corpus[i].frames.data().begin(), corpus[i].frames.data().end(), vids[i].frames.data().begin()));
    CHECK(std::equal(corpus[i].tracks.data().begin(), corpus[i].tracks.data().end(), vids[i].tracks.data().begin()));
  }
  const auto vocab = dataset::build_vocabulary(corpus);
  CHECK(vocab.size() <= 60);
  const auto ex = dataset::to_example(corpus[0], vocab);
  CHECK(ex.input.persons.size() == corpus[0].annotation.persons.size());
  CHECK(ex.target.captions.size() == ex.target.segments.size());
  for (const auto& cap : ex.target.captions) {
    CHECK(cap.back() == text::Vocabulary::kEos);
    CHECK(std::find(cap.begin(), cap.end(), text::Vocabulary::kUnk) == cap.end());
  }
  // Ground truth scored against itself through the prediction path.
  const auto ev = dataset::to_eval(annotation::as_reference(corpus[0].annotation), corpus[0].annotation);
  REQUIRE(ev.predictions.size() == ev.references.size());
  for (std::size_t i = 0; i < ev.predictions.size(); ++i) {
    CHECK(ev.predictions[i].tokens == ev.references[i].tokens);
    CHECK(std::abs(ev.predictions[i].segment.start - ev.references[i].segment.start) < 1e-12);
  }
  fs::remove_all(dir);
}
