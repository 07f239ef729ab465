#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hcap/diff/nn.hpp"
#include "hcap/diff/optim.hpp"
#include "hcap/diff/tensor.hpp"
#include "hcap/geometry.hpp"
#include "hcap/msdatt.hpp"
#include "hcap/setcrit.hpp"

namespace hcap::model {

using diff::Tensor;
using geometry::Segment;

/// Architecture hyperparameters.
struct ModelConfig {
  std::size_t feature_dim = 256;  // C, frame backbone width
  std::size_t person_dim = 256;   // pooled person feature width
  std::size_t d_model = 256;
  std::size_t ffn_dim = 1024;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t heads = 8;
  std::size_t levels = 4;
  std::size_t points = 4;
  std::size_t lstm_hidden = 256;
  std::size_t embed_dim = 64;
  std::size_t attn_dim = 64;  // soft-attention width inside the caption head
  std::size_t vocab_size = 64;
  std::size_t max_caption_len = 65;
  std::size_t query_budget = 0;  // 0: one query per person track
  double conf_threshold = 0.5;

  static ModelConfig desk();
  static ModelConfig paper();

  void validate() const;  // throws ConfigError
  std::map<std::string, std::string> to_kv() const;
  // Applies recognized keys; unknown keys are returned untouched.
  std::map<std::string, std::string> apply_kv(const std::map<std::string, std::string>& kv);
};

/// One tracked person entering the decoder.
struct PersonInput {
  std::vector<double> feature;  // [person_dim]
  Segment track;                // extent reported by the tracker
  std::size_t person_index = 0;
};

struct VideoInput {
  Tensor frames;  // [T x feature_dim]
  std::vector<PersonInput> persons;
};

struct VideoTarget {
  std::vector<Segment> segments;
  std::vector<std::vector<int>> captions;  // token ids, each ending in <eos>
};

struct DecoderState {
  Tensor queries;     // [n x d]
  Tensor ref_logits;  // [n x 1]; reference point = sigmoid(ref_logits)
  Tensor refs() const;
};

struct HeadOutput {
  Tensor segments;    // [n x 2] (start, end)
  Tensor confidence;  // [n x 1]
};

struct LstmState {
  Tensor h;
  Tensor c;
};

struct PersonPrediction {
  Segment segment;
  double confidence = 0.0;
  std::vector<int> tokens;  // greedy decode, ends with <eos> unless max length was hit
  std::size_t query_index = 0;
};

struct ForwardPass {
  msdatt::FeaturePyramid pyramid;
  msdatt::FeaturePyramid caption_values;
  std::vector<DecoderState> layers;
  std::vector<HeadOutput> heads;
};

// Fixed sinusoidal positional encodings, [length x width].
Tensor sinusoidal_encoding(std::size_t length, std::size_t width);

// Feature vector describing a tracker-reported extent.
std::vector<double> track_encoding(const Segment& track);
constexpr std::size_t kTrackEncodingDim = 36;

class CaptionModel {
 public:
  CaptionModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  diff::ParameterSet& params() { return params_; }
  const diff::ParameterSet& params() const { return params_; }

  msdatt::FeaturePyramid encode(const Tensor& frames) const;
  DecoderState project_queries(std::span<const PersonInput> persons) const;
  std::vector<DecoderState> decode(const DecoderState& initial, const msdatt::FeaturePyramid& pyramid) const;
  HeadOutput localize(const DecoderState& state) const;

  msdatt::FeaturePyramid caption_values(const msdatt::FeaturePyramid& pyramid) const;
  // One LSTM step over a batch of queries: returns the new state and the
  // word logits [n x V].
  std::pair<LstmState, Tensor> caption_step(const LstmState& prev, const Tensor& queries, const Tensor& refs,
                                            std::span<const int> prev_words,
                                            const msdatt::FeaturePyramid& values) const;
  LstmState initial_lstm_state(std::size_t n) const;

  // Teacher-forced length-normalized caption loss for each (row, caption)
  // pair, [pairs x 1].
  Tensor caption_losses(const DecoderState& state, std::span<const std::size_t> rows,
                        std::span<const std::vector<int>* const> captions,
                        const msdatt::FeaturePyramid& values) const;
  std::vector<std::vector<int>> greedy_captions(const DecoderState& state,
                                                const msdatt::FeaturePyramid& values) const;

  // Encoder, query projection, decoder and localization head. Returns an
  // empty pass (no layers) when there are no queries.
  ForwardPass forward(const VideoInput& video) const;
  setcrit::SetLossResult loss(const VideoInput& video, const VideoTarget& target,
                              const setcrit::SetCriterion& criterion) const;
  // Predictions of the last decoder layer with confidence >= threshold,
  // sorted by start time. With keep_all, no confidence filtering.
  std::vector<PersonPrediction> infer(const VideoInput& video, bool keep_all = false) const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  struct FeedForward {
    diff::Linear in, out;
    Tensor operator()(const Tensor& x) const;
  };
  struct EncoderLayer {
    msdatt::MultiScaleDeformableAttention attn;
    diff::LayerNorm norm1, norm2;
    FeedForward ffn;
  };
  struct SelfAttention {
    diff::Linear q, k, v, out;
    std::size_t heads = 1;
    Tensor operator()(const Tensor& x) const;
  };
  struct DecoderLayer {
    SelfAttention self_attn;
    msdatt::MultiScaleDeformableAttention cross_attn;
    diff::LayerNorm norm1, norm2, norm3;
    FeedForward ffn;
    diff::Linear ref_delta;
  };

  ModelConfig cfg_;
  diff::ParameterSet params_;
  diff::Linear input_proj_;
  std::vector<EncoderLayer> encoder_;
  diff::Linear person_proj_, track_proj_, ref_head_;
  Tensor extra_queries_;
  std::vector<DecoderLayer> decoder_;
  diff::Linear box_hidden1_, box_hidden2_, box_out_, conf_head_;
  msdatt::DeformableSoftAttention dsa_;
  Tensor embedding_;
  diff::Linear lstm_input_;
  Tensor lstm_recurrent_;
  diff::Linear word_out_;
};

// ---- training ------------------------------------------------------------------

struct TrainingExample {
  std::string video_id;
  VideoInput input;
  VideoTarget target;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::uint64_t seed = 1;
  diff::AdamConfig adam{};
  setcrit::SetCriterion criterion{};
  bool checked = true;
};

struct StepRecord {
  std::size_t step = 0;
  std::string video_id;
  double loss = 0.0;
  double grad_norm = 0.0;
};

using StepCallback = std::function<void(const StepRecord&)>;

// One video per step; video order reshuffled every epoch from the seed.
std::vector<StepRecord> train(CaptionModel& model, std::span<const TrainingExample> corpus, const TrainConfig& cfg,
                              const StepCallback& on_step = {});

// TrainConfig keys share the flat key=value format with ModelConfig.
std::map<std::string, std::string> apply_kv(TrainConfig& cfg, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> to_kv(const TrainConfig& cfg);

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);
void write_kv_file(const std::filesystem::path& path, const std::map<std::string, std::string>& kv);

}  // namespace hcap::model
