#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcap/geometry.hpp"

namespace hcap::metrics {

using Tokens = std::vector<std::string>;
using geometry::Segment;

// ---- caption metrics ------------------------------------------------------------

// Clipped n-gram precision (n = 1..4) with brevity penalty. When some
// precision is zero, n >= 2 counts get add-one smoothing; a zero unigram
// precision still yields 0.
double bleu4(const Tokens& candidate, const Tokens& reference);

// LCS F-measure with beta = 1.2.
double rouge_l(const Tokens& candidate, const Tokens& reference);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

std::string porter_stem(std::string_view word);

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// Exact-then-stem unigram alignment; alpha 0.9, beta 3, gamma 0.5.
MeteorDetail meteor_lite_detail(const Tokens& candidate, const Tokens& reference);
double meteor_lite(const Tokens& candidate, const Tokens& reference);

struct CaptionPair {
  Tokens candidate;
  Tokens reference;
};

/// CIDEr-D with document frequencies taken from a fixed reference corpus.
class CiderD {
 public:
  explicit CiderD(std::span<const Tokens> reference_corpus, double sigma = 6.0);
  // In [0, 10].
  double score(const Tokens& candidate, const Tokens& reference) const;
  double idf(const std::string& ngram_key) const;

 private:
  std::map<std::string, std::size_t> df_;
  double log_n_;
  double sigma_;
};

// Per-item CIDEr-D with idf over the pair references; mean via cider_d().
std::vector<double> cider_d_scores(std::span<const CaptionPair> pairs);
double cider_d(std::span<const CaptionPair> pairs);

// ---- protocol -------------------------------------------------------------------

struct TimedText {
  Segment segment;
  Tokens tokens;
};

struct VideoEval {
  std::string video_id;
  std::vector<TimedText> predictions;
  std::vector<TimedText> references;
};

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t = {0.3, 0.5, 0.7, 0.9};
  return t;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> n = {"BLEU-4", "METEOR-lite", "CIDEr-D", "ROUGE-L"};
  return n;
}

struct MatchedPair {
  std::size_t prediction = 0;
  std::size_t reference = 0;
  double tiou = 0.0;
};

// Greedy one-to-one matching by descending tIoU (ties: earlier reference,
// then earlier segment start, end and caption text, so input order does not
// matter). Pairs with tIoU <= 0 are never matched. Sorted by reference.
std::vector<MatchedPair> greedy_tiou_match(std::span<const TimedText> preds, std::span<const TimedText> refs);

struct FlatRow {
  std::string video_id;
  std::string metric;
  std::string threshold;  // "0.3" ... or "avg"
  double score = 0.0;
};

struct EvalReport {
  std::vector<double> thresholds;
  // metric -> score per threshold (same order as `thresholds`)
  std::map<std::string, std::vector<double>> per_threshold;
  std::map<std::string, double> average;
  double soda_c = 0.0;
  std::vector<std::size_t> matched;  // per threshold
  std::size_t predictions = 0;
  std::size_t references = 0;
  std::size_t videos = 0;
  std::vector<std::string> diagnostics;
  std::vector<FlatRow> rows;  // per video x metric x threshold (+ SODA_c)

  std::string to_json() const;
  std::string to_tsv() const;
};

// Each caption metric at threshold t is the sum over kept pairs divided by
// the number of predictions; unmatched predictions score 0.
EvalReport tiou_matched_eval(std::span<const VideoEval> corpus,
                             std::span<const double> thresholds = default_thresholds());

// Order-preserving optimal matching of start-sorted sequences maximizing
// sum tIoU x METEOR-lite; F-measure of total/|preds| and total/|refs|.
double soda_c(std::span<const TimedText> preds, std::span<const TimedText> refs);
// Optimal total score of the above matching.
double soda_total(std::span<const TimedText> preds, std::span<const TimedText> refs);

}  // namespace hcap::metrics
