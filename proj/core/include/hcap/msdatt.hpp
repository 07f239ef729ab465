#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hcap/diff/nn.hpp"
#include "hcap/diff/tensor.hpp"

namespace hcap::msdatt {

using diff::Tensor;

/// Temporal feature pyramid: level l is [T_l x d], T_{l+1} = ceil(T_l / 2).
struct FeaturePyramid {
  std::vector<Tensor> levels;

  std::size_t num_levels() const { return levels.size(); }
  std::size_t width() const { return levels.empty() ? 0 : levels.front().cols(); }
};

// Stride-2 average pooling of `base` down to `levels` scales.
FeaturePyramid build_pyramid(const Tensor& base, std::size_t levels);

// Linear interpolation of a [T x d] map at normalized coordinate p, with
// u = p (T - 1). Coordinates outside [0, T - 1] sample zeros.
std::vector<double> sample_linear(const Tensor& level, double p);

// ---- differentiable kernels --------------------------------------------------

// Gathers deformable samples. For query q, head h, level l, point k the
// location is refs[q] + offsets[q, (h, l, k)] / T_l, sampled (as in
// sample_linear) from the head's channel slice of levels[l].
// refs: [nq x 1]; offsets: [nq x heads*L*points] in level-frame units.
// Returns [nq*heads*L*points x d/heads], rows ordered (q, h, l, k).
Tensor deform_sample(std::span<const Tensor> levels, const Tensor& refs, const Tensor& offsets, std::size_t heads,
                     std::size_t points);

// samples [g*p x c], weights [g x p] -> [g x c]: out[g] = sum_k w[g,k] samples[g*p + k].
Tensor group_weighted_sum(const Tensor& samples, const Tensor& weights);

// samples [g*p x c], keys [g x c] -> [g x p]: out[g,k] = <samples[g*p + k], keys[g]>.
Tensor group_dot(const Tensor& samples, const Tensor& keys);

// ---- modules -----------------------------------------------------------------

struct DeformableConfig {
  std::size_t d_model = 256;
  std::size_t heads = 8;
  std::size_t levels = 4;
  std::size_t points = 4;
};

/// Multi-scale deformable attention: per head, a softmax-weighted sum of
/// value-projected samples around each query's reference point.
class MultiScaleDeformableAttention {
 public:
  MultiScaleDeformableAttention() = default;
  MultiScaleDeformableAttention(diff::ParameterSet& params, const std::string& name, const DeformableConfig& cfg,
                                diff::Rng& rng);

  // Value projection of every pyramid level (reusable across queries).
  FeaturePyramid project_values(const FeaturePyramid& pyramid) const;

  // queries [nq x d], refs [nq x 1] in [0, 1].
  Tensor operator()(const Tensor& queries, const Tensor& refs, const FeaturePyramid& pyramid) const;
  Tensor attend(const Tensor& queries, const Tensor& refs, const FeaturePyramid& values) const;

  // Softmax-normalized attention weights, [nq*heads x L*points].
  Tensor attention_weights(const Tensor& queries) const;

  diff::Linear offsets;
  diff::Linear weights;
  diff::Linear value;
  diff::Linear output;
  DeformableConfig cfg;
};

/// Deformable soft attention for caption decoding: L*K samples drawn around
/// the reference point (offsets driven by [h ; q]) act as keys and values
/// of a single soft-attention read with query [h ; q].
class DeformableSoftAttention {
 public:
  DeformableSoftAttention() = default;
  DeformableSoftAttention(diff::ParameterSet& params, const std::string& name, std::size_t hidden_dim,
                          std::size_t d_model, std::size_t attn_dim, std::size_t levels, std::size_t points,
                          diff::Rng& rng);

  FeaturePyramid project_values(const FeaturePyramid& pyramid) const;

  // hidden [nq x hidden_dim], queries [nq x d], refs [nq x 1] -> context [nq x d].
  Tensor operator()(const Tensor& hidden, const Tensor& queries, const Tensor& refs,
                    const FeaturePyramid& values) const;

  diff::Linear offsets;
  diff::Linear query_proj;
  Tensor key_proj;  // [d x attn_dim]; a key bias would cancel inside the softmax
  diff::Linear value;
  std::size_t levels = 4;
  std::size_t points = 4;
  std::size_t attn_dim = 64;
};

}  // namespace hcap::msdatt
