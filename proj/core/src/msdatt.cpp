#include "hcap/msdatt.hpp"

#include <cmath>
#include <numbers>

#include "hcap/diff/ops.hpp"
#include "hcap/error.hpp"

namespace hcap::msdatt {

using diff::detail::Node;
using NodePtr = std::shared_ptr<Node>;

FeaturePyramid build_pyramid(const Tensor& base, std::size_t levels) {
  if (levels == 0) throw ConfigError("build_pyramid: need at least one level");
  FeaturePyramid pyr;
  pyr.levels.push_back(base);
  for (std::size_t l = 1; l < levels; ++l) pyr.levels.push_back(diff::avg_pool_rows2(pyr.levels.back()));
  return pyr;
}

namespace {

struct Tap {
  bool valid = false;
  std::size_t i0 = 0;
  double w1 = 0.0;  // weight of row i0 + 1
  bool has_i1 = false;
};

Tap locate(double p, std::size_t len) {
  Tap tap;
  const double u = p * static_cast<double>(len - 1);
  if (!(u >= 0.0) || u > static_cast<double>(len - 1)) return tap;
  tap.valid = true;
  const double fl = std::floor(u);
  tap.i0 = static_cast<std::size_t>(fl);
  tap.w1 = u - fl;
  tap.has_i1 = tap.i0 + 1 < len;
  return tap;
}

}  // namespace

std::vector<double> sample_linear(const Tensor& level, double p) {
  const std::size_t len = level.rows(), d = level.cols();
  std::vector<double> out(d, 0.0);
  const Tap tap = locate(p, len);
  if (!tap.valid) return out;
  const auto x = level.data();
  for (std::size_t c = 0; c < d; ++c) {
    out[c] = (1.0 - tap.w1) * x[tap.i0 * d + c] + (tap.has_i1 ? tap.w1 * x[(tap.i0 + 1) * d + c] : 0.0);
  }
  return out;
}

Tensor deform_sample(std::span<const Tensor> levels, const Tensor& refs, const Tensor& offsets, std::size_t heads,
                     std::size_t points) {
  const std::size_t L = levels.size();
  if (L == 0 || heads == 0 || points == 0) throw ConfigError("deform_sample: empty sampling configuration");
  const std::size_t d = levels[0].cols();
  if (d % heads != 0) {
    throw ConfigError("deform_sample: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  for (const auto& lv : levels) {
    if (lv.cols() != d) throw DimensionError("deform_sample: pyramid levels disagree in width");
  }
  const std::size_t nq = refs.rows();
  const std::size_t per_query = heads * L * points;
  if (refs.size() != nq || offsets.rows() != nq || offsets.cols() != per_query) {
    throw DimensionError("deform_sample: refs " + diff::shape_str(refs.shape()) + " / offsets " +
                         diff::shape_str(offsets.shape()) + " do not fit " + std::to_string(heads) + "x" +
                         std::to_string(L) + "x" + std::to_string(points) + " sampling");
  }
  const std::size_t dh = d / heads;
  std::vector<double> out(nq * per_query * dh, 0.0);
  std::vector<double> locs(nq * per_query);
  std::vector<std::size_t> lens(L);
  for (std::size_t l = 0; l < L; ++l) lens[l] = levels[l].rows();

  const auto rd = refs.data();
  const auto od = offsets.data();
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t l = 0; l < L; ++l) {
        const auto x = levels[l].data();
        for (std::size_t k = 0; k < points; ++k) {
          const std::size_t col = (h * L + l) * points + k;
          const double p = rd[q] + od[q * per_query + col] / static_cast<double>(lens[l]);
          locs[q * per_query + col] = p;
          const Tap tap = locate(p, lens[l]);
          if (!tap.valid) continue;
          double* dst = out.data() + (q * per_query + col) * dh;
          const double* r0 = x.data() + tap.i0 * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) dst[c] = (1.0 - tap.w1) * r0[c];
          if (tap.has_i1) {
            const double* r1 = r0 + d;
            for (std::size_t c = 0; c < dh; ++c) dst[c] += tap.w1 * r1[c];
          }
        }
      }
    }
  }

  std::vector<Tensor> inputs(levels.begin(), levels.end());
  inputs.push_back(refs);
  inputs.push_back(offsets);
  std::vector<NodePtr> level_nodes;
  for (const auto& lv : levels) level_nodes.push_back(lv.node());

  return diff::detail::make_result(
      {nq * per_query, dh}, std::move(out), inputs,
      [=, locs = std::move(locs), rn = refs.node(), on = offsets.node()](const NodePtr& o) {
        return [=, o = o.get()] {
          const bool want_loc = rn->requires_grad || on->requires_grad;
          std::span<double> gr, go;
          if (rn->requires_grad) gr = rn->grad_buffer();
          if (on->requires_grad) go = on->grad_buffer();
          for (std::size_t q = 0; q < nq; ++q) {
            for (std::size_t h = 0; h < heads; ++h) {
              for (std::size_t l = 0; l < L; ++l) {
                const auto& lv = level_nodes[l];
                const double scale_u = static_cast<double>(lens[l] - 1);
                for (std::size_t k = 0; k < points; ++k) {
                  const std::size_t col = (h * L + l) * points + k;
                  const Tap tap = locate(locs[q * per_query + col], lens[l]);
                  if (!tap.valid) continue;
                  const double* g = o->grad.data() + (q * per_query + col) * dh;
                  const std::size_t base0 = tap.i0 * d + h * dh;
                  if (lv->requires_grad) {
                    auto gx = lv->grad_buffer();
                    for (std::size_t c = 0; c < dh; ++c) gx[base0 + c] += (1.0 - tap.w1) * g[c];
                    if (tap.has_i1) {
                      for (std::size_t c = 0; c < dh; ++c) gx[base0 + d + c] += tap.w1 * g[c];
                    }
                  }
                  if (want_loc) {
                    // d sample / d u = x[i0+1] - x[i0] (x[i0+1] is zero padding at the edge)
                    double du = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) {
                      const double x1 = tap.has_i1 ? lv->data[base0 + d + c] : 0.0;
                      du += g[c] * (x1 - lv->data[base0 + c]);
                    }
                    const double dp = du * scale_u;
                    if (!gr.empty()) gr[q] += dp;
                    if (!go.empty()) go[q * per_query + col] += dp / static_cast<double>(lens[l]);
                  }
                }
              }
            }
          }
        };
      },
      "deform_sample");
}

Tensor group_weighted_sum(const Tensor& samples, const Tensor& weights) {
  const std::size_t g = weights.rows(), p = weights.cols(), c = samples.cols();
  if (samples.rows() != g * p) {
    throw DimensionError("group_weighted_sum: samples " + diff::shape_str(samples.shape()) + " vs weights " +
                         diff::shape_str(weights.shape()));
  }
  const auto s = samples.data();
  const auto w = weights.data();
  std::vector<double> out(g * c, 0.0);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t k = 0; k < p; ++k) {
      const double wk = w[i * p + k];
      const double* row = s.data() + (i * p + k) * c;
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] += wk * row[j];
    }
  return diff::detail::make_result(
      {g, c}, std::move(out), {&samples, &weights},
      [sn = samples.node(), wn = weights.node(), g, p, c](const NodePtr& o) {
        return [sn, wn, o = o.get(), g, p, c] {
          const auto& go = o->grad;
          if (sn->requires_grad) {
            auto gs = sn->grad_buffer();
            for (std::size_t i = 0; i < g; ++i)
              for (std::size_t k = 0; k < p; ++k) {
                const double wk = wn->data[i * p + k];
                for (std::size_t j = 0; j < c; ++j) gs[(i * p + k) * c + j] += wk * go[i * c + j];
              }
          }
          if (wn->requires_grad) {
            auto gw = wn->grad_buffer();
            for (std::size_t i = 0; i < g; ++i)
              for (std::size_t k = 0; k < p; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) acc += sn->data[(i * p + k) * c + j] * go[i * c + j];
                gw[i * p + k] += acc;
              }
          }
        };
      },
      "group_weighted_sum");
}

Tensor group_dot(const Tensor& samples, const Tensor& keys) {
  const std::size_t g = keys.rows(), c = keys.cols();
  if (samples.cols() != c || samples.rows() % g != 0) {
    throw DimensionError("group_dot: samples " + diff::shape_str(samples.shape()) + " vs keys " +
                         diff::shape_str(keys.shape()));
  }
  const std::size_t p = samples.rows() / g;
  const auto s = samples.data();
  const auto kd = keys.data();
  std::vector<double> out(g * p, 0.0);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t k = 0; k < p; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += s[(i * p + k) * c + j] * kd[i * c + j];
      out[i * p + k] = acc;
    }
  return diff::detail::make_result(
      {g, p}, std::move(out), {&samples, &keys},
      [sn = samples.node(), kn = keys.node(), g, p, c](const NodePtr& o) {
        return [sn, kn, o = o.get(), g, p, c] {
          const auto& go = o->grad;
          if (sn->requires_grad) {
            auto gs = sn->grad_buffer();
            for (std::size_t i = 0; i < g; ++i)
              for (std::size_t k = 0; k < p; ++k)
                for (std::size_t j = 0; j < c; ++j) gs[(i * p + k) * c + j] += go[i * p + k] * kn->data[i * c + j];
          }
          if (kn->requires_grad) {
            auto gk = kn->grad_buffer();
            for (std::size_t i = 0; i < g; ++i)
              for (std::size_t k = 0; k < p; ++k)
                for (std::size_t j = 0; j < c; ++j) gk[i * c + j] += go[i * p + k] * sn->data[(i * p + k) * c + j];
          }
        };
      },
      "group_dot");
}

// ---- MultiScaleDeformableAttention ------------------------------------------

MultiScaleDeformableAttention::MultiScaleDeformableAttention(diff::ParameterSet& params, const std::string& name,
                                                             const DeformableConfig& c, diff::Rng& rng)
    : cfg(c) {
  if (c.heads == 0 || c.d_model % c.heads != 0) {
    throw ConfigError("msdatt: d_model " + std::to_string(c.d_model) + " not divisible by " + std::to_string(c.heads) + " heads");
  }
  const std::size_t n = c.heads * c.levels * c.points;
  offsets = diff::Linear(params, name + ".offsets", c.d_model, n, rng);
  weights = diff::Linear(params, name + ".weights", c.d_model, n, rng);
  value = diff::Linear(params, name + ".value", c.d_model, c.d_model, rng);
  output = diff::Linear(params, name + ".output", c.d_model, c.d_model, rng);

  // Start every head on a fixed 1-D direction with points 1..K frames out,
  // and uniform attention weights.
  offsets.zero_init();
  auto bias = offsets.bias.mutable_data();
  for (std::size_t h = 0; h < c.heads; ++h) {
    const double dir = std::cos(2.0 * std::numbers::pi * static_cast<double>(h) / static_cast<double>(c.heads));
    for (std::size_t l = 0; l < c.levels; ++l)
      for (std::size_t k = 0; k < c.points; ++k) bias[(h * c.levels + l) * c.points + k] = dir * static_cast<double>(k + 1);
  }
  weights.zero_init();
}

FeaturePyramid MultiScaleDeformableAttention::project_values(const FeaturePyramid& pyramid) const {
  FeaturePyramid out;
  for (const auto& lv : pyramid.levels) out.levels.push_back(value(lv));
  return out;
}

Tensor MultiScaleDeformableAttention::attention_weights(const Tensor& queries) const {
  const std::size_t nq = queries.rows();
  const std::size_t lk = cfg.levels * cfg.points;
  return diff::softmax(diff::reshape(weights(queries), {nq * cfg.heads, lk}), 1);
}

Tensor MultiScaleDeformableAttention::attend(const Tensor& queries, const Tensor& refs, const FeaturePyramid& values) const {
  if (values.num_levels() != cfg.levels) {
    throw DimensionError("msdatt: pyramid has " + std::to_string(values.num_levels()) + " levels, module expects " +
                         std::to_string(cfg.levels));
  }
  const std::size_t nq = queries.rows();
  Tensor samples = deform_sample(values.levels, refs, offsets(queries), cfg.heads, cfg.points);
  Tensor mixed = group_weighted_sum(samples, attention_weights(queries));  // [nq*H x dh]
  return output(diff::reshape(mixed, {nq, cfg.d_model}));
}

Tensor MultiScaleDeformableAttention::operator()(const Tensor& queries, const Tensor& refs,
                                                 const FeaturePyramid& pyramid) const {
  return attend(queries, refs, project_values(pyramid));
}

// ---- DeformableSoftAttention --------------------------------------------------

DeformableSoftAttention::DeformableSoftAttention(diff::ParameterSet& params, const std::string& name,
                                                 std::size_t hidden_dim, std::size_t d_model, std::size_t attn,
                                                 std::size_t lv, std::size_t pts, diff::Rng& rng)
    : levels(lv), points(pts), attn_dim(attn) {
  offsets = diff::Linear(params, name + ".offsets", hidden_dim + d_model, lv * pts, rng);
  query_proj = diff::Linear(params, name + ".query", hidden_dim + d_model, attn, rng);
  key_proj = params.add(name + ".key.weight", diff::xavier_uniform(d_model, attn, rng));
  value = diff::Linear(params, name + ".value", d_model, d_model, rng);

  // Points spread symmetrically around the reference: -3, -1, 1, 3 frames for K = 4.
  offsets.zero_init();
  auto bias = offsets.bias.mutable_data();
  for (std::size_t l = 0; l < lv; ++l)
    for (std::size_t k = 0; k < pts; ++k) bias[l * pts + k] = 2.0 * static_cast<double>(k) - static_cast<double>(pts - 1);
}

FeaturePyramid DeformableSoftAttention::project_values(const FeaturePyramid& pyramid) const {
  FeaturePyramid out;
  for (const auto& lv : pyramid.levels) out.levels.push_back(value(lv));
  return out;
}

Tensor DeformableSoftAttention::operator()(const Tensor& hidden, const Tensor& queries, const Tensor& refs,
                                           const FeaturePyramid& values) const {
  if (values.num_levels() != levels) throw DimensionError("dsa: pyramid level count mismatch");
  Tensor joint = diff::concat_cols({hidden, queries});
  Tensor samples = deform_sample(values.levels, refs, offsets(joint), 1, points);  // [nq*L*K x d]
  Tensor key_dir = diff::matmul(query_proj(joint), diff::transpose(key_proj));   // [nq x d]
  Tensor logits = diff::scale(group_dot(samples, key_dir), 1.0 / std::sqrt(static_cast<double>(attn_dim)));
  return group_weighted_sum(samples, diff::softmax(logits, 1));
}

}  // namespace hcap::msdatt
