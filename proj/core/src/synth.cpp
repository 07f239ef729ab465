#include "hcap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "hcap/error.hpp"
#include "hcap/features.hpp"
#include "hcap/text.hpp"

namespace hcap::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Values as they come back from an f32 feature file.
double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::size_t phrase_count() { return normal_phrases().size() + anomaly_phrases().size(); }

}  // namespace

void SynthConfig::validate() const {
  if (videos == 0) throw ConfigError("synth: videos must be positive");
  if (!(min_duration_s > 0 && min_duration_s <= max_duration_s)) throw ConfigError("synth: bad duration range");
  if (!(min_persons >= 1 && min_persons <= max_persons)) throw ConfigError("synth: bad persons range");
  if (!(min_extent > 0 && min_extent <= max_extent && max_extent <= 1)) throw ConfigError("synth: bad extent range");
  if (feature_dim == 0 || frame_rows < 2) throw ConfigError("synth: feature_dim and frame_rows must be positive");
  if (!(fps > 0) || width < 64 || height < 64) throw ConfigError("synth: bad frame geometry");
  if (!(noise >= 0) || !(anomaly_fraction >= 0 && anomaly_fraction <= 1) || !(track_jitter >= 0)) {
    throw ConfigError("synth: noise, anomaly_fraction and track_jitter must be non-negative (fraction <= 1)");
  }
}

const std::vector<std::string>& normal_phrases() {
  static const std::vector<std::string> p = {"walks forward", "walks away",   "turns left",   "turns right",
                                             "looks around",  "looks back",   "stands still", "stands up"};
  return p;
}

const std::vector<std::string>& anomaly_phrases() {
  static const std::vector<std::string> p = {"fights back", "runs away"};
  return p;
}

std::vector<std::string> template_vocabulary() {
  std::vector<std::string> caps = {"the person in clothes then"};
  for (const auto& c : annotation::palette()) caps.emplace_back(c.name);
  for (const auto& p : normal_phrases()) caps.push_back(p);
  for (const auto& p : anomaly_phrases()) caps.push_back(p);
  std::vector<std::string> words;
  for (const auto& c : caps) {
    for (auto& t : text::tokenize(c)) words.push_back(std::move(t));
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

std::size_t latent_dim() { return annotation::kPaletteSize + 2 * phrase_count() + 1; }

diff::Tensor projection(const SynthConfig& cfg) {
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x70726f6aull));
  std::normal_distribution<double> nd(0.0, 0.5);
  std::vector<double> w(latent_dim() * cfg.feature_dim);
  for (auto& x : w) x = nd(rng);
  return diff::Tensor::from({latent_dim(), cfg.feature_dim}, std::move(w));
}

std::string video_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%04zu", index);
  return buf;
}

std::vector<std::size_t> active_per_row(const annotation::VideoAnnotation& ann, std::size_t rows) {
  std::vector<std::size_t> out(rows, 0);
  for (std::size_t t = 0; t < rows; ++t) {
    const double time = (static_cast<double>(t) + 0.5) / static_cast<double>(rows) * ann.duration_s;
    for (const auto& p : ann.persons) {
      if (p.appear_s <= time && time < p.disappear_s) ++out[t];
    }
  }
  return out;
}

SynthVideo generate_video(const SynthConfig& cfg, std::size_t index, const diff::Tensor& proj) {
  cfg.validate();
  if (proj.rows() != latent_dim() || proj.cols() != cfg.feature_dim) {
    throw DimensionError("synth: projection must be [latent_dim x feature_dim]");
  }
  std::mt19937_64 rng(splitmix64(cfg.seed * 0x100000001B3ull + index + 1));
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::normal_distribution<double> noise(0.0, cfg.noise > 0 ? cfg.noise : 1.0);

  SynthVideo v;
  auto& ann = v.annotation;
  ann.video_id = video_id(index);
  ann.fps = cfg.fps;
  ann.width = cfg.width;
  ann.height = cfg.height;
  const auto total_frames = static_cast<std::int64_t>(std::llround(uniform(cfg.min_duration_s, cfg.max_duration_s) * cfg.fps));
  ann.duration_s = static_cast<double>(total_frames) / cfg.fps;
  const bool anomaly = uniform(0.0, 1.0) < cfg.anomaly_fraction;
  ann.scene_label = anomaly ? std::string(annotation::scene_labels()[pick(1, 13)]) : "normal";

  struct Draft {
    std::int64_t first, last;
    annotation::BBox box;
    std::size_t vp1, vp2;  // indices into normal ++ anomaly phrases
  };
  const auto n = pick(cfg.min_persons, cfg.max_persons);
  std::vector<Draft> drafts;
  const auto& normal = normal_phrases();
  for (std::size_t i = 0; i < n; ++i) {
    Draft d;
    const auto len = static_cast<std::int64_t>(std::llround(uniform(cfg.min_extent, cfg.max_extent) * static_cast<double>(total_frames)));
    d.first = static_cast<std::int64_t>(pick(0, static_cast<std::size_t>(total_frames - len)));
    d.last = d.first + std::max<std::int64_t>(len, 1);
    const double w = std::floor(uniform(40, 200)), h = std::floor(uniform(80, 400));
    d.box = {std::floor(uniform(0, static_cast<double>(cfg.width) - w)),
             std::floor(uniform(0, static_cast<double>(cfg.height) - h)), w, h};
    d.vp1 = pick(0, normal.size() - 1);
    d.vp2 = (d.vp1 + pick(1, normal.size() - 1)) % normal.size();
    drafts.push_back(d);
  }
  if (anomaly) {
    // At least one person's second action turns anomalous.
    const auto forced = pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const bool swap = i == forced || uniform(0.0, 1.0) < 0.5;
      if (swap) drafts[i].vp2 = normal.size() + pick(0, anomaly_phrases().size() - 1);
    }
  }
  std::stable_sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    return a.first != b.first ? a.first < b.first : a.box.x < b.box.x;
  });

  auto phrase = [&](std::size_t k) {
    return k < normal.size() ? normal[k] : anomaly_phrases()[k - normal.size()];
  };
  const auto ld = latent_dim(), c = cfg.feature_dim;
  const auto w = proj.data();
  std::vector<std::vector<double>> person_feat;
  std::vector<double> tracks;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = drafts[i];
    annotation::PersonRecord p;
    p.person_index = i + 1;
    p.color_index = i % annotation::kPaletteSize;
    p.first_frame = d.first;
    p.bbox = d.box;
    p.appear_s = static_cast<double>(d.first) / cfg.fps;
    p.disappear_s = static_cast<double>(d.last) / cfg.fps;
    p.caption = "the person in " + std::string(annotation::palette()[p.color_index].name) + " clothes " +
                phrase(d.vp1) + " then " + phrase(d.vp2);
    ann.persons.push_back(p);

    std::vector<double> latent(ld, 0.0);
    latent[p.color_index] = 1.0;
    latent[annotation::kPaletteSize + d.vp1] = 1.0;
    latent[annotation::kPaletteSize + phrase_count() + d.vp2] = 1.0;
    latent[ld - 1] = 1.0;
    std::vector<double> f(c, 0.0);
    for (std::size_t a = 0; a < ld; ++a) {
      if (latent[a] == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) f[j] += latent[a] * w[a * c + j];
    }
    person_feat.push_back(std::move(f));

    const auto seg = annotation::normalized_extent(ann, p);
    double s = std::clamp(seg.start + cfg.track_jitter * std::normal_distribution<double>()(rng), 0.0, 1.0);
    double e = std::clamp(seg.end + cfg.track_jitter * std::normal_distribution<double>()(rng), 0.0, 1.0);
    if (e < s) std::swap(s, e);
    tracks.push_back(s);
    tracks.push_back(e);
  }

  const auto rows = cfg.frame_rows;
  std::vector<double> frames(rows * c, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    const double time = (static_cast<double>(t) + 0.5) / static_cast<double>(rows) * ann.duration_s;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = ann.persons[i];
      if (!(p.appear_s <= time && time < p.disappear_s)) continue;
      for (std::size_t j = 0; j < c; ++j) frames[t * c + j] += person_feat[i][j];
    }
  }
  for (auto& x : frames) x = f32(x + (cfg.noise > 0 ? noise(rng) : 0.0));
  std::vector<double> persons;
  for (const auto& f : person_feat) {
    for (double x : f) persons.push_back(f32(x + (cfg.noise > 0 ? noise(rng) : 0.0)));
  }
  v.frames = diff::Tensor::from({rows, c}, std::move(frames));
  v.persons = diff::Tensor::from({n, c}, std::move(persons));
  v.tracks = diff::Tensor::from({n, 2}, std::move(tracks));
  return v;
}

std::vector<SynthVideo> generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto proj = projection(cfg);
  std::vector<SynthVideo> out;
  out.reserve(cfg.videos);
  for (std::size_t i = 0; i < cfg.videos; ++i) out.push_back(generate_video(cfg, i, proj));
  return out;
}

Split split(std::vector<std::string> ids, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return !(r >= 0); }) || std::abs(total - 1.0) > 1e-6) {
    throw ConfigError("split: ratios must be non-negative and sum to 1");
  }
  std::mt19937_64 rng(splitmix64(seed ^ 0x73706c6974ull));
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = ids.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw ConfigError("split: " + std::to_string(n) + " videos leave a subset empty at these ratios");
  }
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return s;
}

std::vector<std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot read manifest " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write manifest " + path.string());
  for (const auto& id : ids) os << id << '\n';
}

void write_corpus(const std::filesystem::path& dir, const std::vector<SynthVideo>& videos, const Split& s) {
  std::filesystem::create_directories(dir / "annotations");
  std::filesystem::create_directories(dir / "features");
  std::vector<std::string> all;
  for (const auto& v : videos) {
    const auto& id = v.annotation.video_id;
    annotation::write_annotation(dir / "annotations" / (id + ".json"), v.annotation);
    features::write_features(dir / "features" / (id + ".frames.hcft"), v.frames, features::Dtype::f32);
    features::write_features(dir / "features" / (id + ".persons.hcft"), v.persons, features::Dtype::f32);
    features::write_features(dir / "features" / (id + ".tracks.hcft"), v.tracks, features::Dtype::f64);
    all.push_back(id);
  }
  write_manifest(dir / "all.txt", all);
  write_manifest(dir / "train.txt", s.train);
  write_manifest(dir / "val.txt", s.val);
  write_manifest(dir / "test.txt", s.test);
}

}  // namespace hcap::synth
