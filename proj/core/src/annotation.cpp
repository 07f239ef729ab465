#include "hcap/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hcap/text.hpp"
#include "json.hpp"

namespace hcap::annotation {

using ojson = nlohmann::ordered_json;

const std::array<PaletteColor, kPaletteSize>& palette() {
  static const std::array<PaletteColor, kPaletteSize> colors = {{
      {"red", 230, 25, 75},       {"orange", 245, 130, 48},   {"yellow", 255, 225, 25},  {"green", 60, 180, 75},
      {"blue", 0, 130, 200},      {"purple", 145, 30, 180},   {"pink", 250, 190, 212},   {"brown", 170, 110, 40},
      {"black", 0, 0, 0},         {"white", 255, 255, 255},   {"gray", 128, 128, 128},   {"cyan", 70, 240, 240},
      {"magenta", 240, 50, 230},  {"lime", 210, 245, 60},     {"navy", 0, 0, 128},       {"teal", 0, 128, 128},
      {"maroon", 128, 0, 0},      {"olive", 128, 128, 0},     {"beige", 255, 250, 200},  {"gold", 255, 215, 0},
      {"silver", 192, 192, 192},  {"violet", 238, 130, 238},  {"indigo", 75, 0, 130},    {"turquoise", 64, 224, 208},
      {"coral", 255, 127, 80},    {"salmon", 250, 128, 114},  {"khaki", 240, 230, 140},  {"lavender", 230, 190, 255},
      {"crimson", 220, 20, 60},   {"tan", 210, 180, 140},
  }};
  return colors;
}

const std::array<std::string_view, 14>& scene_labels() {
  static const std::array<std::string_view, 14> labels = {
      "normal",    "abuse",    "arrest",   "arson",    "assault",    "road_accident", "burglary",
      "explosion", "fighting", "robbery",  "shooting", "stealing",   "shoplifting",   "vandalism",
  };
  return labels;
}

bool is_scene_label(std::string_view label) {
  const auto& l = scene_labels();
  return std::find(l.begin(), l.end(), label) != l.end();
}

std::string format(const Diagnostic& d) {
  return (d.warning ? "warning: " : "error: ") + (d.path.empty() ? std::string("<document>") : d.path) + ": " +
         d.message;
}

namespace {

std::string first_error(const std::string& source, const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (!d.warning) return source + ": " + format(d);
  }
  return source + ": invalid document";
}

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool is_safe_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && id.front() != '.';
}

// Structural reader: type checks with field paths, collecting diagnostics.
class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& diags) : diags_(diags) {}

  void error(const std::string& path, std::string msg) { diags_.push_back({path, std::move(msg), false}); }

  bool object(const ojson& j, const std::string& path, std::initializer_list<std::string_view> required,
              std::initializer_list<std::string_view> optional = {}) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return false;
    }
    bool ok = true;
    for (auto key : required) {
      if (!j.contains(std::string(key))) {
        error(join(path, key), "missing field");
        ok = false;
      }
    }
    for (const auto& [key, _] : j.items()) {
      const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                         std::find(optional.begin(), optional.end(), key) != optional.end();
      if (!known) {
        error(join(path, key), "unknown field");
        ok = false;
      }
    }
    return ok;
  }

  double number(const ojson& j, std::string_view key, const std::string& path) {
    const auto& v = j.at(std::string(key));
    if (!v.is_number()) {
      error(join(path, key), "expected a number");
      return 0.0;
    }
    return v.get<double>();
  }

  std::int64_t integer(const ojson& j, std::string_view key, const std::string& path) {
    const auto& v = j.at(std::string(key));
    if (!v.is_number_integer()) {
      error(join(path, key), "expected an integer");
      return 0;
    }
    return v.get<std::int64_t>();
  }

  std::string string(const ojson& j, std::string_view key, const std::string& path) {
    const auto& v = j.at(std::string(key));
    if (!v.is_string()) {
      error(join(path, key), "expected a string");
      return {};
    }
    return v.get<std::string>();
  }

  bool array(const ojson& j, std::string_view key, const std::string& path) {
    if (!j.at(std::string(key)).is_array()) {
      error(join(path, key), "expected an array");
      return false;
    }
    return true;
  }

  BBox bbox(const ojson& j, const std::string& path) {
    BBox b;
    if (!object(j, path, {"x", "y", "w", "h"})) return b;
    b.x = number(j, "x", path);
    b.y = number(j, "y", path);
    b.w = number(j, "w", path);
    b.h = number(j, "h", path);
    return b;
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

 private:
  std::vector<Diagnostic>& diags_;
};

ojson parse_json(std::string_view text, const std::string& source) {
  try {
    return ojson::parse(text.begin(), text.end());
  } catch (const ojson::parse_error& e) {
    throw ParseError(source, {{"", std::string("malformed document: ") + e.what(), false}});
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
  if (!os) throw FormatError("write failed: " + path.string());
}

ojson bbox_json(const BBox& b) {
  ojson j;
  j["x"] = b.x;
  j["y"] = b.y;
  j["w"] = b.w;
  j["h"] = b.h;
  return j;
}

}  // namespace

ParseError::ParseError(std::string source, std::vector<Diagnostic> diagnostics)
    : FormatError(first_error(source, diagnostics)), source_(std::move(source)), diagnostics_(std::move(diagnostics)) {}

bool has_errors(std::span<const Diagnostic> diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return !d.warning; });
}

std::vector<Diagnostic> validate(const VideoAnnotation& ann) {
  std::vector<Diagnostic> out;
  auto err = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg), false}); };
  auto warn = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg), true}); };

  if (!is_safe_id(ann.video_id)) err("video_id", "must be non-empty and use only [A-Za-z0-9_.-]");
  if (!(std::isfinite(ann.fps) && ann.fps > 0)) err("fps", "must be a positive number, got " + num(ann.fps));
  if (ann.width <= 0) err("width", "must be positive, got " + std::to_string(ann.width));
  if (ann.height <= 0) err("height", "must be positive, got " + std::to_string(ann.height));
  if (!(std::isfinite(ann.duration_s) && ann.duration_s > 0)) {
    err("duration_s", "must be a positive number, got " + num(ann.duration_s));
  }
  if (!is_scene_label(ann.scene_label)) err("scene_label", "unknown scene label '" + ann.scene_label + "'");

  const double frames = ann.fps * ann.duration_s;
  for (std::size_t i = 0; i < ann.persons.size(); ++i) {
    const auto& p = ann.persons[i];
    const auto base = "persons[" + std::to_string(i) + "]";
    if (p.person_index != i + 1) {
      err(base + ".person_index", "expected " + std::to_string(i + 1) + " (consecutive from 1), got " +
                                      std::to_string(p.person_index));
    }
    if (p.person_index >= 1 && p.color_index != (p.person_index - 1) % kPaletteSize) {
      err(base + ".color_index", "palette rule requires " + std::to_string((p.person_index - 1) % kPaletteSize) +
                                     " for person " + std::to_string(p.person_index) + ", got " +
                                     std::to_string(p.color_index));
    }
    if (p.first_frame < 0 || (std::isfinite(frames) && static_cast<double>(p.first_frame) >= frames)) {
      err(base + ".first_frame", "outside the video (" + std::to_string(p.first_frame) + ")");
    }
    if (i > 0) {
      const auto& q = ann.persons[i - 1];
      if (p.first_frame < q.first_frame) {
        err(base + ".first_frame", "persons must be ordered by first appearance");
      } else if (p.first_frame == q.first_frame && p.bbox.x < q.bbox.x) {
        err(base + ".bbox.x", "same first frame as the previous person: the leftmost box comes first");
      }
    }
    const auto w = static_cast<double>(ann.width), h = static_cast<double>(ann.height);
    if (!(p.bbox.w > 0)) err(base + ".bbox.w", "must be positive, got " + num(p.bbox.w));
    if (!(p.bbox.h > 0)) err(base + ".bbox.h", "must be positive, got " + num(p.bbox.h));
    if (!(p.bbox.x >= 0 && p.bbox.x + p.bbox.w <= w)) err(base + ".bbox.x", "box leaves the frame horizontally");
    if (!(p.bbox.y >= 0 && p.bbox.y + p.bbox.h <= h)) err(base + ".bbox.y", "box leaves the frame vertically");
    if (!(std::isfinite(p.appear_s) && p.appear_s >= 0)) err(base + ".appear_s", "must be >= 0, got " + num(p.appear_s));
    if (!(p.appear_s < p.disappear_s)) {
      err(base + ".disappear_s", "must be after appear_s (" + num(p.appear_s) + "), got " + num(p.disappear_s));
    } else if (!(p.disappear_s <= ann.duration_s)) {
      err(base + ".disappear_s", "exceeds duration_s (" + num(ann.duration_s) + ")");
    }
    const auto tokens = text::tokenize(p.caption).size();
    if (tokens < kCaptionHardMin || tokens > kCaptionHardMax) {
      err(base + ".caption", "has " + std::to_string(tokens) + " tokens, allowed range is [1, 120]");
    } else if (tokens < kCaptionSoftMin || tokens > kCaptionSoftMax) {
      warn(base + ".caption", "has " + std::to_string(tokens) + " tokens, outside the usual [15, 65]");
    }
    for (std::size_t k = 0; k < p.track.size(); ++k) {
      const auto& tb = p.track[k];
      const auto tp = base + ".track[" + std::to_string(k) + "]";
      if (tb.frame < p.first_frame || (k > 0 && tb.frame <= p.track[k - 1].frame)) {
        err(tp + ".frame", "track frames must increase from first_frame");
      }
      if (!tb.box.inside(w, h)) err(tp + ".bbox", "box is empty or leaves the frame");
    }
  }
  return out;
}

VideoAnnotation parse(std::string_view text, const std::string& source, std::vector<Diagnostic>* warnings) {
  const ojson doc = parse_json(text, source);
  std::vector<Diagnostic> diags;
  Reader rd(diags);
  VideoAnnotation ann;
  if (rd.object(doc, "", {"video_id", "fps", "width", "height", "duration_s", "scene_label", "persons"})) {
    ann.video_id = rd.string(doc, "video_id", "");
    ann.fps = rd.number(doc, "fps", "");
    ann.width = rd.integer(doc, "width", "");
    ann.height = rd.integer(doc, "height", "");
    ann.duration_s = rd.number(doc, "duration_s", "");
    ann.scene_label = rd.string(doc, "scene_label", "");
    if (rd.array(doc, "persons", "")) {
      const auto& arr = doc.at("persons");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& pj = arr[i];
        const auto path = "persons[" + std::to_string(i) + "]";
        PersonRecord p;
        if (rd.object(pj, path,
                      {"person_index", "color_index", "first_frame", "bbox", "appear_s", "disappear_s", "caption"},
                      {"track"})) {
          const auto pi = rd.integer(pj, "person_index", path);
          const auto ci = rd.integer(pj, "color_index", path);
          if (pi < 1) rd.error(path + ".person_index", "must be >= 1");
          if (ci < 0 || ci >= static_cast<std::int64_t>(kPaletteSize)) {
            rd.error(path + ".color_index", "palette slot must lie in [0, 30), got " + std::to_string(ci));
          }
          p.person_index = static_cast<std::size_t>(std::max<std::int64_t>(pi, 0));
          p.color_index = static_cast<std::size_t>(std::max<std::int64_t>(ci, 0));
          p.first_frame = rd.integer(pj, "first_frame", path);
          p.bbox = rd.bbox(pj.at("bbox"), path + ".bbox");
          p.appear_s = rd.number(pj, "appear_s", path);
          p.disappear_s = rd.number(pj, "disappear_s", path);
          p.caption = rd.string(pj, "caption", path);
          if (pj.contains("track") && rd.array(pj, "track", path)) {
            const auto& tr = pj.at("track");
            for (std::size_t k = 0; k < tr.size(); ++k) {
              const auto tp = path + ".track[" + std::to_string(k) + "]";
              TrackBox tb;
              if (rd.object(tr[k], tp, {"frame", "bbox"})) {
                tb.frame = rd.integer(tr[k], "frame", tp);
                tb.box = rd.bbox(tr[k].at("bbox"), tp + ".bbox");
              }
              p.track.push_back(tb);
            }
          }
        }
        ann.persons.push_back(std::move(p));
      }
    }
  }
  // Value checks only make sense on a structurally sound document.
  if (!has_errors(diags)) {
    auto more = validate(ann);
    diags.insert(diags.end(), more.begin(), more.end());
  }
  if (has_errors(diags)) throw ParseError(source, std::move(diags));
  if (warnings) *warnings = std::move(diags);
  return ann;
}

VideoAnnotation read_annotation(const std::filesystem::path& path, std::vector<Diagnostic>* warnings) {
  return parse(read_text(path), path.string(), warnings);
}

std::string serialize(const VideoAnnotation& ann) {
  ojson doc;
  doc["video_id"] = ann.video_id;
  doc["fps"] = ann.fps;
  doc["width"] = ann.width;
  doc["height"] = ann.height;
  doc["duration_s"] = ann.duration_s;
  doc["scene_label"] = ann.scene_label;
  doc["persons"] = ojson::array();
  for (const auto& p : ann.persons) {
    ojson pj;
    pj["person_index"] = p.person_index;
    pj["color_index"] = p.color_index;
    pj["first_frame"] = p.first_frame;
    pj["bbox"] = bbox_json(p.bbox);
    pj["appear_s"] = p.appear_s;
    pj["disappear_s"] = p.disappear_s;
    pj["caption"] = p.caption;
    if (!p.track.empty()) {
      pj["track"] = ojson::array();
      for (const auto& tb : p.track) {
        ojson tj;
        tj["frame"] = tb.frame;
        tj["bbox"] = bbox_json(tb.box);
        pj["track"].push_back(std::move(tj));
      }
    }
    doc["persons"].push_back(std::move(pj));
  }
  return doc.dump(2) + "\n";
}

void write_annotation(const std::filesystem::path& path, const VideoAnnotation& ann) {
  write_text(path, serialize(ann));
}

geometry::Segment normalized_extent(const VideoAnnotation& ann, const PersonRecord& p) {
  return {std::clamp(p.appear_s / ann.duration_s, 0.0, 1.0), std::clamp(p.disappear_s / ann.duration_s, 0.0, 1.0)};
}

// ---- statistics -----------------------------------------------------------------

std::string_view verb_lemma(std::string_view token) {
  static const std::map<std::string_view, std::string_view> lexicon = {
      {"walk", "walk"},   {"walks", "walk"},   {"walked", "walk"},   {"walking", "walk"},
      {"turn", "turn"},   {"turns", "turn"},   {"turned", "turn"},   {"turning", "turn"},
      {"look", "look"},   {"looks", "look"},   {"looked", "look"},   {"looking", "look"},
      {"stand", "stand"}, {"stands", "stand"}, {"stood", "stand"},   {"standing", "stand"},
  };
  auto it = lexicon.find(token);
  return it == lexicon.end() ? std::string_view{} : it->second;
}

CorpusStats stats(std::span<const VideoAnnotation> corpus) {
  if (corpus.empty()) throw ContractError("stats: empty corpus");
  CorpusStats s;
  for (const char* v : {"walk", "turn", "look", "stand"}) s.verb_counts[v] = 0;
  std::size_t total_tokens = 0;
  for (const auto& ann : corpus) {
    ++s.videos;
    (ann.scene_label == "normal" ? s.normal_videos : s.anomaly_videos)++;
    ++s.persons_histogram[ann.persons.size()];
    for (const auto& p : ann.persons) {
      const auto tokens = text::tokenize(p.caption);
      ++s.captions;
      total_tokens += tokens.size();
      ++s.caption_length_histogram[tokens.size()];
      for (const auto& t : tokens) {
        if (auto lemma = verb_lemma(t); !lemma.empty()) ++s.verb_counts[std::string(lemma)];
      }
    }
  }
  s.mean_caption_length = s.captions ? static_cast<double>(total_tokens) / static_cast<double>(s.captions) : 0.0;
  return s;
}

std::string stats_report(const CorpusStats& s) {
  std::ostringstream os;
  os << "videos           " << s.videos << "  (normal " << s.normal_videos << ", anomaly " << s.anomaly_videos
     << ")\n";
  os << "captions         " << s.captions << "\n";
  os << "mean length      " << std::fixed << std::setprecision(2) << s.mean_caption_length << " tokens\n\n";
  os << "persons/video  videos\n";
  for (const auto& [k, v] : s.persons_histogram) os << std::setw(13) << k << "  " << v << "\n";
  os << "\ncaption length  captions\n";
  for (const auto& [k, v] : s.caption_length_histogram) os << std::setw(14) << k << "  " << v << "\n";
  os << "\nverb    count\n";
  std::vector<std::pair<std::string, std::size_t>> verbs(s.verb_counts.begin(), s.verb_counts.end());
  std::stable_sort(verbs.begin(), verbs.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [k, v] : verbs) os << std::left << std::setw(8) << k << std::right << v << "\n";
  return os.str();
}

std::string stats_json(const CorpusStats& s) {
  ojson j;
  j["videos"] = s.videos;
  j["captions"] = s.captions;
  j["mean_caption_length"] = s.mean_caption_length;
  j["normal_videos"] = s.normal_videos;
  j["anomaly_videos"] = s.anomaly_videos;
  auto hist = [](const std::map<std::size_t, std::size_t>& h) {
    ojson a = ojson::array();
    for (const auto& [k, v] : h) a.push_back({k, v});
    return a;
  };
  j["persons_histogram"] = hist(s.persons_histogram);
  j["caption_length_histogram"] = hist(s.caption_length_histogram);
  j["verb_counts"] = s.verb_counts;
  return j.dump(2) + "\n";
}

// ---- tracks ---------------------------------------------------------------------

std::vector<std::int64_t> uniform_positions(std::int64_t n, std::size_t budget) {
  if (n <= 0) throw ContractError("uniform_positions: empty range");
  if (budget == 0) throw ContractError("uniform_positions: zero budget");
  std::vector<std::int64_t> out;
  const auto b = static_cast<std::int64_t>(budget);
  if (n <= b) {
    for (std::int64_t i = 0; i < n; ++i) out.push_back(i);
  } else {
    for (std::int64_t i = 0; i < b; ++i) out.push_back(i * n / b);
  }
  return out;
}

std::vector<ClipDescriptor> crop_tracks(const VideoAnnotation& ann, const FrameSource& source, std::size_t budget) {
  std::vector<ClipDescriptor> out;
  for (const auto& p : ann.persons) {
    ClipDescriptor clip;
    clip.person_index = p.person_index;
    clip.begin_frame = p.first_frame;
    clip.end_frame = static_cast<std::int64_t>(std::ceil(p.disappear_s * ann.fps - 1e-9));
    if (clip.begin_frame < 0 || clip.end_frame > source.frame_count || clip.begin_frame >= clip.end_frame) {
      throw ContractError("crop_tracks: person " + std::to_string(p.person_index) + " spans frames [" +
                          std::to_string(clip.begin_frame) + ", " + std::to_string(clip.end_frame) +
                          ") outside a source of " + std::to_string(source.frame_count) + " frames");
    }
    for (auto pos : uniform_positions(clip.end_frame - clip.begin_frame, budget)) {
      const auto frame = clip.begin_frame + pos;
      clip.frames.push_back(frame);
      // Latest track box at or before this frame; the first-appearance box otherwise.
      BBox box = p.bbox;
      for (const auto& tb : p.track) {
        if (tb.frame > frame) break;
        box = tb.box;
      }
      clip.crops.push_back(box);
    }
    out.push_back(std::move(clip));
  }
  return out;
}

// ---- predictions ----------------------------------------------------------------

PredictionFile parse_predictions(std::string_view text, const std::string& source) {
  const ojson doc = parse_json(text, source);
  std::vector<Diagnostic> diags;
  Reader rd(diags);
  PredictionFile pf;
  if (rd.object(doc, "", {"video_id", "duration_s", "predictions"})) {
    pf.video_id = rd.string(doc, "video_id", "");
    pf.duration_s = rd.number(doc, "duration_s", "");
    if (!(pf.duration_s > 0)) rd.error("duration_s", "must be positive");
    if (rd.array(doc, "predictions", "")) {
      const auto& arr = doc.at("predictions");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto path = "predictions[" + std::to_string(i) + "]";
        TimedCaption tc;
        if (rd.object(arr[i], path, {"start_s", "end_s", "confidence", "caption"})) {
          tc.start_s = rd.number(arr[i], "start_s", path);
          tc.end_s = rd.number(arr[i], "end_s", path);
          tc.confidence = rd.number(arr[i], "confidence", path);
          tc.caption = rd.string(arr[i], "caption", path);
          if (!(tc.start_s >= 0 && tc.start_s <= tc.end_s && tc.end_s <= pf.duration_s)) {
            rd.error(path + ".end_s", "segment must satisfy 0 <= start_s <= end_s <= duration_s");
          }
          if (!(tc.confidence >= 0 && tc.confidence <= 1)) rd.error(path + ".confidence", "must lie in [0, 1]");
        }
        pf.predictions.push_back(std::move(tc));
      }
    }
  }
  if (has_errors(diags)) throw ParseError(source, std::move(diags));
  return pf;
}

PredictionFile read_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_text(path), path.string());
}

std::string serialize(const PredictionFile& p) {
  ojson doc;
  doc["video_id"] = p.video_id;
  doc["duration_s"] = p.duration_s;
  doc["predictions"] = ojson::array();
  for (const auto& tc : p.predictions) {
    ojson j;
    j["start_s"] = tc.start_s;
    j["end_s"] = tc.end_s;
    j["confidence"] = tc.confidence;
    j["caption"] = tc.caption;
    doc["predictions"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_predictions(const std::filesystem::path& path, const PredictionFile& p) { write_text(path, serialize(p)); }

PredictionFile as_reference(const VideoAnnotation& ann) {
  PredictionFile pf{ann.video_id, ann.duration_s, {}};
  for (const auto& p : ann.persons) pf.predictions.push_back({p.appear_s, p.disappear_s, 1.0, p.caption});
  std::stable_sort(pf.predictions.begin(), pf.predictions.end(),
                   [](const TimedCaption& a, const TimedCaption& b) { return a.start_s < b.start_s; });
  return pf;
}

}  // namespace hcap::annotation
