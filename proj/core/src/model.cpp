#include "hcap/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "hcap/diff/ops.hpp"
#include "hcap/error.hpp"
#include "hcap/text.hpp"

namespace hcap::model {

namespace ops = diff;
using text::Vocabulary;

// ---- configuration -------------------------------------------------------------

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.d_model = 512;
  c.ffn_dim = 2048;
  c.lstm_hidden = 512;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(feature_dim, "feature_dim");
  positive(person_dim, "person_dim");
  positive(d_model, "d_model");
  positive(ffn_dim, "ffn_dim");
  positive(enc_layers, "enc_layers");
  positive(dec_layers, "dec_layers");
  positive(heads, "heads");
  positive(levels, "levels");
  positive(points, "points");
  positive(lstm_hidden, "lstm_hidden");
  positive(embed_dim, "embed_dim");
  positive(attn_dim, "attn_dim");
  positive(max_caption_len, "max_caption_len");
  if (d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by heads " + std::to_string(heads));
  }
  if (vocab_size < 5) throw ConfigError("vocab_size must cover the 4 special tokens and at least one word");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) throw ConfigError("conf_threshold must lie in [0, 1]");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"feature_dim", std::to_string(feature_dim)},
      {"person_dim", std::to_string(person_dim)},
      {"d_model", std::to_string(d_model)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"enc_layers", std::to_string(enc_layers)},
      {"dec_layers", std::to_string(dec_layers)},
      {"heads", std::to_string(heads)},
      {"levels", std::to_string(levels)},
      {"points", std::to_string(points)},
      {"lstm_hidden", std::to_string(lstm_hidden)},
      {"embed_dim", std::to_string(embed_dim)},
      {"attn_dim", std::to_string(attn_dim)},
      {"vocab_size", std::to_string(vocab_size)},
      {"max_caption_len", std::to_string(max_caption_len)},
      {"query_budget", std::to_string(query_budget)},
      {"conf_threshold", fmt_double(conf_threshold)},
  };
}

std::map<std::string, std::string> ModelConfig::apply_kv(const std::map<std::string, std::string>& kv) {
  const std::map<std::string, std::size_t ModelConfig::*> sizes = {
      {"feature_dim", &ModelConfig::feature_dim},   {"person_dim", &ModelConfig::person_dim},
      {"d_model", &ModelConfig::d_model},           {"ffn_dim", &ModelConfig::ffn_dim},
      {"enc_layers", &ModelConfig::enc_layers},     {"dec_layers", &ModelConfig::dec_layers},
      {"heads", &ModelConfig::heads},               {"levels", &ModelConfig::levels},
      {"points", &ModelConfig::points},             {"lstm_hidden", &ModelConfig::lstm_hidden},
      {"embed_dim", &ModelConfig::embed_dim},       {"attn_dim", &ModelConfig::attn_dim},
      {"vocab_size", &ModelConfig::vocab_size},     {"max_caption_len", &ModelConfig::max_caption_len},
      {"query_budget", &ModelConfig::query_budget},
  };
  std::map<std::string, std::string> rest;
  for (const auto& [k, v] : kv) {
    if (auto it = sizes.find(k); it != sizes.end()) {
      this->*(it->second) = parse_size(k, v);
    } else if (k == "conf_threshold") {
      conf_threshold = parse_double(k, v);
    } else {
      rest.emplace(k, v);
    }
  }
  return rest;
}

// ---- encodings -----------------------------------------------------------------

Tensor sinusoidal_encoding(std::size_t length, std::size_t width) {
  std::vector<double> v(length * width);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double a = static_cast<double>(t) * freq;
      v[t * width + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return Tensor::from({length, width}, std::move(v));
}

std::vector<double> track_encoding(const Segment& track) {
  std::vector<double> v;
  v.reserve(kTrackEncodingDim);
  v.push_back(track.start);
  v.push_back(track.end);
  v.push_back(track.center());
  v.push_back(track.length());
  for (int k = 1; k <= 8; ++k) {
    const double w = k * std::numbers::pi;
    v.push_back(std::sin(w * track.start));
    v.push_back(std::cos(w * track.start));
    v.push_back(std::sin(w * track.end));
    v.push_back(std::cos(w * track.end));
  }
  return v;
}

Tensor DecoderState::refs() const { return ops::sigmoid(ref_logits); }

// ---- model ---------------------------------------------------------------------

Tensor CaptionModel::FeedForward::operator()(const Tensor& x) const { return out(ops::relu(in(x))); }

Tensor CaptionModel::SelfAttention::operator()(const Tensor& x) const {
  const auto d = q.out_features();
  const auto dh = d / heads;
  const Tensor qs = q(x), ks = k(x), vs = v(x);
  const double norm = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto lo = h * dh, hi = lo + dh;
    auto scores = ops::scale(ops::matmul(ops::slice_cols(qs, lo, hi), ops::transpose(ops::slice_cols(ks, lo, hi))), norm);
    parts.push_back(ops::matmul(ops::softmax(scores, 1), ops::slice_cols(vs, lo, hi)));
  }
  return out(heads == 1 ? parts.front() : ops::concat_cols(parts));
}

CaptionModel::CaptionModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  diff::Rng rng(seed);
  const auto d = cfg_.d_model;
  const msdatt::DeformableConfig dc{d, cfg_.heads, cfg_.levels, cfg_.points};

  input_proj_ = diff::Linear(params_, "input_proj", cfg_.feature_dim, d, rng);
  for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
    const auto p = "encoder." + std::to_string(l);
    EncoderLayer layer;
    layer.attn = msdatt::MultiScaleDeformableAttention(params_, p + ".attn", dc, rng);
    layer.norm1 = diff::LayerNorm(params_, p + ".norm1", d);
    layer.ffn = {diff::Linear(params_, p + ".ffn.in", d, cfg_.ffn_dim, rng),
                 diff::Linear(params_, p + ".ffn.out", cfg_.ffn_dim, d, rng)};
    layer.norm2 = diff::LayerNorm(params_, p + ".norm2", d);
    encoder_.push_back(std::move(layer));
  }

  person_proj_ = diff::Linear(params_, "query.person", cfg_.person_dim, d, rng);
  track_proj_ = diff::Linear(params_, "query.track", kTrackEncodingDim, d, rng);
  ref_head_ = diff::Linear(params_, "query.ref", d, 1, rng);
  if (cfg_.query_budget > 0) extra_queries_ = params_.add("query.extra", diff::normal({cfg_.query_budget, d}, 1.0, rng));

  for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
    const auto p = "decoder." + std::to_string(l);
    DecoderLayer layer;
    layer.self_attn = {diff::Linear(params_, p + ".self.q", d, d, rng), diff::Linear(params_, p + ".self.k", d, d, rng),
                       diff::Linear(params_, p + ".self.v", d, d, rng),
                       diff::Linear(params_, p + ".self.out", d, d, rng), cfg_.heads};
    layer.norm1 = diff::LayerNorm(params_, p + ".norm1", d);
    layer.cross_attn = msdatt::MultiScaleDeformableAttention(params_, p + ".cross", dc, rng);
    layer.norm2 = diff::LayerNorm(params_, p + ".norm2", d);
    layer.ffn = {diff::Linear(params_, p + ".ffn.in", d, cfg_.ffn_dim, rng),
                 diff::Linear(params_, p + ".ffn.out", cfg_.ffn_dim, d, rng)};
    layer.norm3 = diff::LayerNorm(params_, p + ".norm3", d);
    layer.ref_delta = diff::Linear(params_, p + ".ref_delta", d, 1, rng);
    layer.ref_delta.zero_init();
    decoder_.push_back(std::move(layer));
  }

  box_hidden1_ = diff::Linear(params_, "head.box.0", d, d, rng);
  box_hidden2_ = diff::Linear(params_, "head.box.1", d, d, rng);
  box_out_ = diff::Linear(params_, "head.box.2", d, 2, rng);
  box_out_.zero_init();
  conf_head_ = diff::Linear(params_, "head.conf", d, 1, rng);

  dsa_ = msdatt::DeformableSoftAttention(params_, "caption.dsa", cfg_.lstm_hidden, d, cfg_.attn_dim, cfg_.levels,
                                         cfg_.points, rng);
  embedding_ = params_.add("caption.embedding", diff::normal({cfg_.vocab_size, cfg_.embed_dim}, 0.1, rng));
  const auto hid = cfg_.lstm_hidden;
  lstm_input_ = diff::Linear(params_, "caption.lstm.input", 2 * d + cfg_.embed_dim, 4 * hid, rng);
  {
    auto b = lstm_input_.bias.mutable_data();
    for (std::size_t j = hid; j < 2 * hid; ++j) b[j] = 1.0;  // forget gate
  }
  lstm_recurrent_ = params_.add("caption.lstm.recurrent", diff::xavier_uniform(hid, 4 * hid, rng));
  word_out_ = diff::Linear(params_, "caption.out", hid, cfg_.vocab_size, rng);
}

msdatt::FeaturePyramid CaptionModel::encode(const Tensor& frames) const {
  if (frames.ndim() != 2 || frames.cols() != cfg_.feature_dim) {
    throw DimensionError("frame features must be [T x " + std::to_string(cfg_.feature_dim) + "], got " +
                         diff::shape_str(frames.shape()));
  }
  if (diff::checked()) diff::detail::check_finite(frames.data(), "frame features");
  const auto t = frames.rows();
  Tensor x = input_proj_(frames);
  const Tensor pe = sinusoidal_encoding(t, cfg_.d_model);
  std::vector<double> r(t);
  for (std::size_t i = 0; i < t; ++i) r[i] = t > 1 ? static_cast<double>(i) / static_cast<double>(t - 1) : 0.5;
  const Tensor refs = Tensor::from({t, 1}, std::move(r));
  for (const auto& layer : encoder_) {
    const auto pyramid = msdatt::build_pyramid(x, cfg_.levels);
    x = layer.norm1(ops::add(x, layer.attn(ops::add(x, pe), refs, pyramid)));
    x = layer.norm2(ops::add(x, layer.ffn(x)));
  }
  return msdatt::build_pyramid(x, cfg_.levels);
}

DecoderState CaptionModel::project_queries(std::span<const PersonInput> persons) const {
  const auto n = persons.size();
  const auto total = std::max(n, cfg_.query_budget);
  if (total == 0) return {};
  std::vector<Tensor> parts;
  if (n > 0) {
    std::vector<double> feats, tracks;
    feats.reserve(n * cfg_.person_dim);
    tracks.reserve(n * kTrackEncodingDim);
    for (const auto& p : persons) {
      if (p.feature.size() != cfg_.person_dim) {
        throw DimensionError("person feature has " + std::to_string(p.feature.size()) + " values, expected " +
                             std::to_string(cfg_.person_dim));
      }
      if (diff::checked()) diff::detail::check_finite(p.feature, "person feature");
      feats.insert(feats.end(), p.feature.begin(), p.feature.end());
      const auto enc = track_encoding(p.track);
      tracks.insert(tracks.end(), enc.begin(), enc.end());
    }
    parts.push_back(ops::add(person_proj_(Tensor::from({n, cfg_.person_dim}, std::move(feats))),
                             track_proj_(Tensor::from({n, kTrackEncodingDim}, std::move(tracks)))));
  }
  if (total > n) parts.push_back(ops::slice_rows(extra_queries_, 0, total - n));
  Tensor q = parts.size() == 1 ? parts.front() : ops::concat_rows(parts);
  return {q, ref_head_(q)};
}

std::vector<DecoderState> CaptionModel::decode(const DecoderState& initial,
                                               const msdatt::FeaturePyramid& pyramid) const {
  std::vector<DecoderState> out;
  out.reserve(decoder_.size());
  Tensor q = initial.queries, rl = initial.ref_logits;
  for (const auto& layer : decoder_) {
    const Tensor refs = ops::sigmoid(rl);
    q = layer.norm1(ops::add(q, layer.self_attn(q)));
    q = layer.norm2(ops::add(q, layer.cross_attn(q, refs, pyramid)));
    q = layer.norm3(ops::add(q, layer.ffn(q)));
    rl = ops::add(rl, layer.ref_delta(q));
    out.push_back({q, rl});
  }
  return out;
}

HeadOutput CaptionModel::localize(const DecoderState& state) const {
  const Tensor h = ops::relu(box_hidden2_(ops::relu(box_hidden1_(state.queries))));
  const Tensor o = box_out_(h);
  const Tensor center = ops::sigmoid(ops::add(state.ref_logits, ops::slice_cols(o, 0, 1)));
  const Tensor half = ops::scale(ops::sigmoid(ops::slice_cols(o, 1, 2)), 0.5);
  const Tensor start = ops::clamp(ops::sub(center, half), 0.0, 1.0);
  const Tensor end = ops::clamp(ops::add(center, half), 0.0, 1.0);
  return {ops::concat_cols({start, end}), ops::sigmoid(conf_head_(state.queries))};
}

msdatt::FeaturePyramid CaptionModel::caption_values(const msdatt::FeaturePyramid& pyramid) const {
  return dsa_.project_values(pyramid);
}

LstmState CaptionModel::initial_lstm_state(std::size_t n) const {
  return {Tensor::zeros({n, cfg_.lstm_hidden}), Tensor::zeros({n, cfg_.lstm_hidden})};
}

std::pair<LstmState, Tensor> CaptionModel::caption_step(const LstmState& prev, const Tensor& queries,
                                                        const Tensor& refs, std::span<const int> prev_words,
                                                        const msdatt::FeaturePyramid& values) const {
  std::vector<std::size_t> ids(prev_words.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int w = prev_words[i];
    if (w < 0 || static_cast<std::size_t>(w) >= cfg_.vocab_size) {
      throw ContractError("token id " + std::to_string(w) + " outside vocabulary of " +
                          std::to_string(cfg_.vocab_size));
    }
    ids[i] = static_cast<std::size_t>(w);
  }
  const Tensor z = dsa_(prev.h, queries, refs, values);
  const Tensor x = ops::concat_cols({z, queries, ops::gather_rows(embedding_, ids)});
  const Tensor gates = ops::add(lstm_input_(x), ops::matmul(prev.h, lstm_recurrent_));
  const auto hid = cfg_.lstm_hidden;
  const Tensor i = ops::sigmoid(ops::slice_cols(gates, 0, hid));
  const Tensor f = ops::sigmoid(ops::slice_cols(gates, hid, 2 * hid));
  const Tensor g = ops::tanh(ops::slice_cols(gates, 2 * hid, 3 * hid));
  const Tensor o = ops::sigmoid(ops::slice_cols(gates, 3 * hid, 4 * hid));
  LstmState next;
  next.c = ops::add(ops::mul(f, prev.c), ops::mul(i, g));
  next.h = ops::mul(o, ops::tanh(next.c));
  Tensor logits = word_out_(next.h);
  return {std::move(next), std::move(logits)};
}

Tensor CaptionModel::caption_losses(const DecoderState& state, std::span<const std::size_t> rows,
                                    std::span<const std::vector<int>* const> captions,
                                    const msdatt::FeaturePyramid& values) const {
  if (rows.size() != captions.size()) throw DimensionError("caption_losses: rows and captions differ in length");
  const auto n = rows.size();
  if (n == 0) throw ContractError("caption_losses: no pairs");
  std::vector<std::size_t> len(n);
  std::size_t steps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    len[i] = std::min(captions[i]->size(), cfg_.max_caption_len);
    if (len[i] == 0) throw ContractError("caption_losses: empty caption");
    steps = std::max(steps, len[i]);
  }
  const Tensor q = ops::gather_rows(state.queries, rows);
  const Tensor refs = ops::gather_rows(state.refs(), rows);
  LstmState st = initial_lstm_state(n);
  std::vector<int> prev(n), target(n);
  std::vector<Tensor> nll;
  nll.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& cap = *captions[i];
      prev[i] = t == 0 ? Vocabulary::kBos : (t <= len[i] ? cap[t - 1] : Vocabulary::kPad);
      target[i] = t < len[i] ? cap[t] : -1;
    }
    auto [next, logits] = caption_step(st, q, refs, prev, values);
    st = std::move(next);
    nll.push_back(ops::token_nll(logits, target));
  }
  std::vector<double> w(n * steps, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < len[i]; ++t) w[i * steps + t] = 1.0 / static_cast<double>(len[i]);
  }
  const Tensor all = steps == 1 ? nll.front() : ops::concat_cols(nll);
  return ops::matmul(ops::mul(all, Tensor::from({n, steps}, std::move(w))), Tensor::full({steps, 1}, 1.0));
}

std::vector<std::vector<int>> CaptionModel::greedy_captions(const DecoderState& state,
                                                            const msdatt::FeaturePyramid& values) const {
  const auto n = state.queries.rows();
  const Tensor refs = state.refs();
  std::vector<std::vector<int>> out(n);
  std::vector<bool> done(n, false);
  std::vector<int> prev(n, Vocabulary::kBos);
  LstmState st = initial_lstm_state(n);
  std::size_t remaining = n;
  for (std::size_t t = 0; t < cfg_.max_caption_len && remaining > 0; ++t) {
    auto [next, logits] = caption_step(st, state.queries, refs, prev, values);
    st = std::move(next);
    const auto v = logits.cols();
    const auto ld = logits.data();
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = ld.subspan(i * v, v);
      const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      prev[i] = best;
      if (done[i]) continue;
      out[i].push_back(best);
      if (best == Vocabulary::kEos) {
        done[i] = true;
        --remaining;
      }
    }
  }
  return out;
}

ForwardPass CaptionModel::forward(const VideoInput& video) const {
  ForwardPass pass;
  pass.pyramid = encode(video.frames);
  const auto initial = project_queries(video.persons);
  if (!initial.queries.defined()) return pass;
  pass.layers = decode(initial, pass.pyramid);
  for (const auto& layer : pass.layers) pass.heads.push_back(localize(layer));
  pass.caption_values = caption_values(pass.pyramid);
  return pass;
}

setcrit::SetLossResult CaptionModel::loss(const VideoInput& video, const VideoTarget& target,
                                          const setcrit::SetCriterion& criterion) const {
  if (target.segments.size() != target.captions.size()) {
    throw DimensionError("target has " + std::to_string(target.segments.size()) + " segments but " +
                         std::to_string(target.captions.size()) + " captions");
  }
  const auto pass = forward(video);
  std::vector<setcrit::LayerPrediction> layers;
  if (pass.layers.empty()) layers.push_back({});
  for (std::size_t l = 0; l < pass.layers.size(); ++l) {
    const auto& state = pass.layers[l];
    const auto& values = pass.caption_values;
    layers.push_back({pass.heads[l].segments, pass.heads[l].confidence,
                      [this, &state, &values, &target](std::span<const std::pair<std::size_t, std::size_t>> pairs) {
                        std::vector<std::size_t> rows;
                        std::vector<const std::vector<int>*> caps;
                        for (const auto& [p, g] : pairs) {
                          rows.push_back(p);
                          caps.push_back(&target.captions[g]);
                        }
                        return caption_losses(state, rows, caps, values);
                      }});
  }
  return setcrit::set_loss(layers, target.segments, criterion);
}

std::vector<PersonPrediction> CaptionModel::infer(const VideoInput& video, bool keep_all) const {
  diff::NoGradScope no_grad;
  const auto pass = forward(video);
  std::vector<PersonPrediction> out;
  if (pass.layers.empty()) return out;
  const auto& head = pass.heads.back();
  const auto captions = greedy_captions(pass.layers.back(), pass.caption_values);
  for (std::size_t j = 0; j < captions.size(); ++j) {
    const double conf = head.confidence[j];
    if (!keep_all && conf < cfg_.conf_threshold) continue;
    out.push_back({Segment{head.segments.at(j, 0), head.segments.at(j, 1)}, conf, captions[j], j});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PersonPrediction& a, const PersonPrediction& b) { return a.segment.start < b.segment.start; });
  return out;
}

void CaptionModel::save(const std::filesystem::path& path) const { diff::save_checkpoint(path, params_); }

void CaptionModel::load(const std::filesystem::path& path) { params_.assign(diff::load_checkpoint(path)); }

// ---- training ------------------------------------------------------------------

std::vector<StepRecord> train(CaptionModel& model, std::span<const TrainingExample> corpus, const TrainConfig& cfg,
                              const StepCallback& on_step) {
  if (corpus.empty()) throw ContractError("train: empty corpus");
  diff::CheckedScope checked_scope(cfg.checked);
  diff::Rng rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  auto params = model.params().tensors();
  diff::AdamState state;
  std::vector<StepRecord> log;
  log.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (step % corpus.size() == 0) std::shuffle(order.begin(), order.end(), rng);
    const auto& ex = corpus[order[step % corpus.size()]];
    diff::Tape tape;
    diff::TapeScope scope(tape);
    model.params().zero_grad();
    const auto res = model.loss(ex.input, ex.target, cfg.criterion);
    if (res.loss.requires_grad()) tape.backward(res.loss);
    const double gn = diff::grad_norm(params);
    if (cfg.checked && !(std::isfinite(res.loss.item()) && std::isfinite(gn))) {
      throw DomainError("train: non-finite loss or gradient at step " + std::to_string(step) + " (" + ex.video_id + ")");
    }
    diff::adam_step(params, state, cfg.adam);
    StepRecord rec{step, ex.video_id, res.loss.item(), gn};
    if (on_step) on_step(rec);
    log.push_back(std::move(rec));
  }
  return log;
}

std::map<std::string, std::string> apply_kv(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
  const std::map<std::string, double*> doubles = {
      {"lr", &cfg.adam.lr},
      {"beta1", &cfg.adam.beta1},
      {"beta2", &cfg.adam.beta2},
      {"adam_eps", &cfg.adam.eps},
      {"match_giou", &cfg.criterion.match.alpha_giou},
      {"match_cls", &cfg.criterion.match.alpha_cls},
      {"loss_giou", &cfg.criterion.loss.beta_giou},
      {"loss_cls", &cfg.criterion.loss.beta_cls},
      {"loss_cap", &cfg.criterion.loss.beta_cap},
      {"focal_alpha", &cfg.criterion.focal.alpha},
      {"focal_gamma", &cfg.criterion.focal.gamma},
  };
  std::map<std::string, std::string> rest;
  for (const auto& [k, v] : kv) {
    if (auto it = doubles.find(k); it != doubles.end()) {
      *it->second = parse_double(k, v);
    } else if (k == "steps") {
      cfg.steps = parse_size(k, v);
    } else if (k == "seed") {
      cfg.seed = parse_size(k, v);
    } else if (k == "checked") {
      cfg.checked = parse_bool(k, v);
    } else {
      rest.emplace(k, v);
    }
  }
  if (!(cfg.adam.lr > 0.0)) throw ConfigError("lr must be positive");
  return rest;
}

std::map<std::string, std::string> to_kv(const TrainConfig& cfg) {
  return {
      {"steps", std::to_string(cfg.steps)},
      {"seed", std::to_string(cfg.seed)},
      {"lr", fmt_double(cfg.adam.lr)},
      {"beta1", fmt_double(cfg.adam.beta1)},
      {"beta2", fmt_double(cfg.adam.beta2)},
      {"adam_eps", fmt_double(cfg.adam.eps)},
      {"match_giou", fmt_double(cfg.criterion.match.alpha_giou)},
      {"match_cls", fmt_double(cfg.criterion.match.alpha_cls)},
      {"loss_giou", fmt_double(cfg.criterion.loss.beta_giou)},
      {"loss_cls", fmt_double(cfg.criterion.loss.beta_cls)},
      {"loss_cap", fmt_double(cfg.criterion.loss.beta_cap)},
      {"focal_alpha", fmt_double(cfg.criterion.focal.alpha)},
      {"focal_gamma", fmt_double(cfg.criterion.focal.gamma)},
      {"checked", cfg.checked ? "true" : "false"},
  };
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_kv_file(const std::filesystem::path& path, const std::map<std::string, std::string>& kv) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path.string());
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

}  // namespace hcap::model
