#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "hcap/diff/tensor.hpp"
#include "hcap/geometry.hpp"

namespace hcap::setcrit {

using geometry::Segment;

struct MatchWeights {
  double alpha_giou = 2.0;
  double alpha_cls = 1.0;
};

struct LossWeights {
  double beta_giou = 2.0;
  double beta_cls = 1.0;
  double beta_cap = 1.0;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Dense row-major cost matrix (rows = predictions, cols = ground truth).
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (prediction, ground truth), by prediction
  std::vector<std::size_t> unmatched_predictions;
  double total_cost = 0.0;
};

// Minimum-cost one-to-one assignment covering min(rows, cols) pairs.
Assignment hungarian(const CostMatrix& cost);

// Probability clamped to [1e-7, 1 - 1e-7].
double focal_loss(double prob, int label, FocalParams p = {});

struct ScoredSegment {
  Segment segment;
  double confidence = 0.5;
};

// entry(i, j) = alpha_giou * (1 - gIoU(pred_i, gt_j)) + alpha_cls * focal(conf_i, 1)
CostMatrix match_cost(std::span<const ScoredSegment> preds, std::span<const Segment> gts, MatchWeights w = {});

// ---- differentiable terms --------------------------------------------------

// Per-row focal loss of probabilities [n x 1] against 0/1 labels -> [n x 1].
diff::Tensor focal_loss(const diff::Tensor& probs, std::span<const int> labels, FocalParams p = {});

// 1 - gIoU between rows `pred_rows` of `segments` [n x 2, (start, end)] and
// the matching ground-truth segments -> [len x 1].
diff::Tensor giou_loss(const diff::Tensor& segments, std::span<const std::size_t> pred_rows,
                       std::span<const Segment> gts);

// Length-normalized caption cross-entropy: (1/T) sum_t -log softmax(logits_t)[target_t].
// Negative targets are padding and do not count toward T.
diff::Tensor caption_ce(const diff::Tensor& logits, std::span<const int> targets);
double caption_ce_value(const diff::Tensor& logits, std::span<const int> targets);

// ---- set loss ----------------------------------------------------------------

// Given matched (prediction, ground truth) pairs, returns a [pairs x 1]
// tensor of per-pair caption losses, in the order given.
using CaptionScorer = std::function<diff::Tensor(std::span<const std::pair<std::size_t, std::size_t>>)>;

/// Outputs of one decoder layer's prediction heads.
struct LayerPrediction {
  diff::Tensor segments;    // [n x 2]
  diff::Tensor confidence;  // [n x 1], in (0, 1)
  CaptionScorer caption_loss;
};

struct LayerTerms {
  double giou = 0.0;
  double cls = 0.0;
  double cap = 0.0;
};

struct SetLossResult {
  diff::Tensor loss;  // scalar
  std::vector<Assignment> assignments;  // one per layer
  std::vector<LayerTerms> terms;        // normalized, unweighted
};

struct SetCriterion {
  MatchWeights match;
  LossWeights loss;
  FocalParams focal;
};

// Sum over layers of beta-weighted (gIoU + focal + caption) losses, each
// normalized by max(1, number of ground-truth segments).
SetLossResult set_loss(std::span<const LayerPrediction> layers, std::span<const Segment> gts,
                       const SetCriterion& criterion = {});

}  // namespace hcap::setcrit
