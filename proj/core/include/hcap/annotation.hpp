#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcap/error.hpp"
#include "hcap/geometry.hpp"

namespace hcap::annotation {

using geometry::BBox;

struct PaletteColor {
  std::string_view name;
  std::uint8_t r, g, b;
};

constexpr std::size_t kPaletteSize = 30;
// Person k (1-based, order of first appearance) wears palette[(k - 1) % 30].
const std::array<PaletteColor, kPaletteSize>& palette();

// "normal" followed by the 13 anomaly classes.
const std::array<std::string_view, 14>& scene_labels();
bool is_scene_label(std::string_view label);

struct TrackBox {
  std::int64_t frame = 0;
  BBox box;
  bool operator==(const TrackBox&) const = default;
};

struct PersonRecord {
  std::size_t person_index = 1;  // 1-based order of appearance
  std::size_t color_index = 0;
  std::int64_t first_frame = 0;
  BBox bbox;  // at first_frame
  double appear_s = 0.0;
  double disappear_s = 0.0;
  std::string caption;
  std::vector<TrackBox> track;  // optional per-frame boxes

  bool operator==(const PersonRecord&) const = default;
};

struct VideoAnnotation {
  std::string video_id;
  double fps = 25.0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  double duration_s = 0.0;
  std::string scene_label = "normal";
  std::vector<PersonRecord> persons;

  bool operator==(const VideoAnnotation&) const = default;
};

struct Diagnostic {
  std::string path;  // e.g. "persons[2].bbox.w"
  std::string message;
  bool warning = false;
};

std::string format(const Diagnostic& d);

/// Thrown when a document fails to parse or validate. what() carries the
/// first error; all of them are in diagnostics().
class ParseError : public FormatError {
 public:
  ParseError(std::string source, std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::vector<Diagnostic> diagnostics_;
};

// Caption lengths outside [15, 65] tokens draw a warning; outside [1, 120]
// they are errors.
constexpr std::size_t kCaptionHardMin = 1, kCaptionHardMax = 120;
constexpr std::size_t kCaptionSoftMin = 15, kCaptionSoftMax = 65;

// All invariant violations (errors) and warnings of a parsed value.
std::vector<Diagnostic> validate(const VideoAnnotation& ann);
bool has_errors(std::span<const Diagnostic> diags);

// Parse and validate. Warnings are returned through `warnings` when given.
VideoAnnotation parse(std::string_view text, const std::string& source = "<memory>",
                      std::vector<Diagnostic>* warnings = nullptr);
VideoAnnotation read_annotation(const std::filesystem::path& path, std::vector<Diagnostic>* warnings = nullptr);

// Canonical form: fixed field order, two-space indent, trailing newline.
std::string serialize(const VideoAnnotation& ann);
void write_annotation(const std::filesystem::path& path, const VideoAnnotation& ann);

// Segment in normalized time for a person.
geometry::Segment normalized_extent(const VideoAnnotation& ann, const PersonRecord& p);

// ---- corpus statistics ----------------------------------------------------------

struct CorpusStats {
  std::size_t videos = 0;
  std::size_t captions = 0;
  double mean_caption_length = 0.0;
  std::map<std::size_t, std::size_t> caption_length_histogram;
  std::map<std::size_t, std::size_t> persons_histogram;
  std::map<std::string, std::size_t> verb_counts;  // lemma -> occurrences
  std::size_t normal_videos = 0;
  std::size_t anomaly_videos = 0;
};

// Lemma of a verb token in the built-in lexicon (walk, turn, look, stand and
// inflections), or empty.
std::string_view verb_lemma(std::string_view token);

CorpusStats stats(std::span<const VideoAnnotation> corpus);
std::string stats_report(const CorpusStats& s);  // plain-text tables
std::string stats_json(const CorpusStats& s);

// ---- tracks ---------------------------------------------------------------------

struct FrameSource {
  std::int64_t frame_count = 0;
};

struct ClipDescriptor {
  std::size_t person_index = 0;
  std::int64_t begin_frame = 0;  // inclusive
  std::int64_t end_frame = 0;    // exclusive
  std::vector<std::int64_t> frames;
  std::vector<BBox> crops;  // one per sampled frame
};

// Uniform floor-stride positions of `budget` samples over n frames (all of
// them when n <= budget).
std::vector<std::int64_t> uniform_positions(std::int64_t n, std::size_t budget);

std::vector<ClipDescriptor> crop_tracks(const VideoAnnotation& ann, const FrameSource& source, std::size_t budget = 64);

// ---- predictions ----------------------------------------------------------------

struct TimedCaption {
  double start_s = 0.0;
  double end_s = 0.0;
  double confidence = 1.0;
  std::string caption;
  bool operator==(const TimedCaption&) const = default;
};

struct PredictionFile {
  std::string video_id;
  double duration_s = 0.0;
  std::vector<TimedCaption> predictions;
  bool operator==(const PredictionFile&) const = default;
};

PredictionFile parse_predictions(std::string_view text, const std::string& source = "<memory>");
PredictionFile read_predictions(const std::filesystem::path& path);
std::string serialize(const PredictionFile& p);
void write_predictions(const std::filesystem::path& path, const PredictionFile& p);

// Ground truth viewed as timed captions (sorted by start).
PredictionFile as_reference(const VideoAnnotation& ann);

}  // namespace hcap::annotation
