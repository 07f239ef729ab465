#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hcap/annotation.hpp"
#include "hcap/diff/tensor.hpp"

namespace hcap::synth {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t videos = 20;
  double min_duration_s = 20.0;
  double max_duration_s = 60.0;
  std::size_t min_persons = 4;
  std::size_t max_persons = 8;
  double min_extent = 0.2;  // person extent as a fraction of the video
  double max_extent = 0.7;
  std::size_t feature_dim = 256;
  std::size_t frame_rows = 64;  // feature rows per video
  double fps = 25.0;
  std::int64_t width = 1280;
  std::int64_t height = 720;
  double noise = 0.05;
  double anomaly_fraction = 0.2;
  double track_jitter = 0.01;  // simulated tracker error, normalized time

  void validate() const;  // throws ConfigError
};

// Verb phrases of normal scenes, then the ones swapped in for anomalies.
const std::vector<std::string>& normal_phrases();
const std::vector<std::string>& anomaly_phrases();
// Every word a generated caption can contain.
std::vector<std::string> template_vocabulary();

// Latent attribute layout: palette color, first phrase, second phrase, presence.
std::size_t latent_dim();

struct SynthVideo {
  annotation::VideoAnnotation annotation;
  diff::Tensor frames;   // [frame_rows x feature_dim]
  diff::Tensor persons;  // [N x feature_dim]
  diff::Tensor tracks;   // [N x 2], tracker extents in normalized time
};

// The fixed latent -> feature projection for a seed, [latent_dim x C].
diff::Tensor projection(const SynthConfig& cfg);

// Video `index` depends only on (cfg, index).
SynthVideo generate_video(const SynthConfig& cfg, std::size_t index, const diff::Tensor& projection);
std::vector<SynthVideo> generate(const SynthConfig& cfg);

std::string video_id(std::size_t index);

// Number of persons active at the time of each feature row.
std::vector<std::size_t> active_per_row(const annotation::VideoAnnotation& ann, std::size_t rows);

struct Split {
  std::vector<std::string> train, val, test;
};

inline constexpr std::array<double, 3> kDefaultRatios = {584.0 / 1012.0, 205.0 / 1012.0, 223.0 / 1012.0};

// Seeded shuffle then contiguous slices; sizes are rounded for train and
// val, test takes the rest.
Split split(std::vector<std::string> ids, std::array<double, 3> ratios, std::uint64_t seed);

// Corpus layout:
//   annotations/<id>.json
//   features/<id>.frames.hcft  features/<id>.persons.hcft  features/<id>.tracks.hcft
//   all.txt train.txt val.txt test.txt
void write_corpus(const std::filesystem::path& dir, const std::vector<SynthVideo>& videos, const Split& split);

std::vector<std::string> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids);

}  // namespace hcap::synth
