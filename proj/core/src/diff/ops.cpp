#include "hcap/diff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hcap/error.hpp"

namespace hcap::diff {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MutMap = Eigen::Map<RowMat>;

MutMap view(std::vector<double>& v, std::size_t r, std::size_t c) {
  return MutMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MutMap view(std::span<double> v, std::size_t r, std::size_t c) {
  return MutMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

bool wants(const NodePtr& n) { return n->requires_grad; }

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() > 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

}  // namespace

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " . " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  view(out, m, n).noalias() = view(a.node()->data, m, k) * view(b.node()->data, k, n);
  return detail::make_result(
      {m, n}, std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), m, k, n](const NodePtr& o) {
        return [an, bn, o = o.get(), m, k, n] {
          auto g = view(o->grad, m, n);
          if (wants(an)) view(an->grad_buffer(), m, k).noalias() += g * view(bn->data, k, n).transpose();
          if (wants(bn)) view(bn->grad_buffer(), k, n).noalias() += view(an->data, m, k).transpose() * g;
        };
      },
      "matmul");
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  view(out, c, r) = view(a.node()->data, r, c).transpose();
  return detail::make_result(
      {c, r}, std::move(out), {&a},
      [an = a.node(), r, c](const NodePtr& o) {
        return [an, o = o.get(), r, c] { view(an->grad_buffer(), r, c) += view(o->grad, c, r).transpose(); };
      },
      "transpose");
}

// ---- elementwise -----------------------------------------------------------

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
  if (a.shape() != b.shape() && !a_scalar && !b_scalar) {
    throw DimensionError("elementwise: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const Shape shape = (a_scalar && !b_scalar) ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  const auto& ad = a.node()->data;
  const auto& bd = b.node()->data;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[a_scalar ? 0 : i], y = bd[b_scalar ? 0 : i];
    switch (op) {
      case BinaryOp::add: out[i] = x + y; break;
      case BinaryOp::sub: out[i] = x - y; break;
      case BinaryOp::mul: out[i] = x * y; break;
    }
  }
  return detail::make_result(
      shape, std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), op, n, a_scalar, b_scalar](const NodePtr& o) {
        return [an, bn, o = o.get(), op, n, a_scalar, b_scalar] {
          const auto& g = o->grad;
          if (wants(an)) {
            auto ga = an->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              const double d = op == BinaryOp::mul ? bn->data[b_scalar ? 0 : i] : 1.0;
              ga[a_scalar ? 0 : i] += g[i] * d;
            }
          }
          if (wants(bn)) {
            auto gb = bn->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
              double d = 1.0;
              if (op == BinaryOp::sub) d = -1.0;
              if (op == BinaryOp::mul) d = an->data[a_scalar ? 0 : i];
              gb[b_scalar ? 0 : i] += g[i] * d;
            }
          }
        };
      },
      "elementwise");
}

Tensor elementwise(UnaryOp op, const Tensor& a) {
  const auto& x = a.node()->data;
  const std::size_t n = x.size();
  std::vector<double> y(n);
  switch (op) {
    case UnaryOp::sigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        // Branch keeps exp() from overflowing for large |x|.
        y[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      }
      break;
    case UnaryOp::tanh:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
      break;
    case UnaryOp::relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
      break;
    case UnaryOp::exp:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
      break;
    case UnaryOp::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (checked() && !(x[i] > 0)) throw DomainError("log: argument " + std::to_string(x[i]) + " is not positive");
        y[i] = std::log(x[i]);
      }
      break;
    case UnaryOp::neg:
      for (std::size_t i = 0; i < n; ++i) y[i] = -x[i];
      break;
  }
  return detail::make_result(
      a.shape(), std::move(y), {&a},
      [an = a.node(), op, n](const NodePtr& o) {
        return [an, o = o.get(), op, n] {
          const auto& g = o->grad;
          const auto& x = an->data;
          const auto& y = o->data;
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            switch (op) {
              case UnaryOp::sigmoid: d = y[i] * (1.0 - y[i]); break;
              case UnaryOp::tanh: d = 1.0 - y[i] * y[i]; break;
              case UnaryOp::relu: d = x[i] > 0 ? 1.0 : 0.0; break;
              case UnaryOp::exp: d = y[i]; break;
              case UnaryOp::log: d = 1.0 / x[i]; break;
              case UnaryOp::neg: d = -1.0; break;
            }
            gx[i] += g[i] * d;
          }
        };
      },
      "elementwise");
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> y(a.data().begin(), a.data().end());
  for (auto& v : y) v *= factor;
  return detail::make_result(
      a.shape(), std::move(y), {&a},
      [an = a.node(), factor](const NodePtr& o) {
        return [an, o = o.get(), factor] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i] * factor;
        };
      },
      "scale");
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> y(a.data().begin(), a.data().end());
  for (auto& v : y) v += offset;
  return detail::make_result(
      a.shape(), std::move(y), {&a},
      [an = a.node()](const NodePtr& o) {
        return [an, o = o.get()] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i];
        };
      },
      "add_scalar");
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  std::vector<double> y(a.data().begin(), a.data().end());
  for (auto& v : y) v = std::clamp(v, lo, hi);
  return detail::make_result(
      a.shape(), std::move(y), {&a},
      [an = a.node(), lo, hi](const NodePtr& o) {
        return [an, o = o.get(), lo, hi] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < gx.size(); ++i) {
            const double x = an->data[i];
            if (x >= lo && x <= hi) gx[i] += o->grad[i];
          }
        };
      },
      "clamp");
}

Tensor add_row(const Tensor& a, const Tensor& b) {
  require_2d(a, "add_row");
  const std::size_t r = a.rows(), c = a.cols();
  if (b.size() != c) {
    throw DimensionError("add_row: bias " + shape_str(b.shape()) + " does not fit " + shape_str(a.shape()));
  }
  std::vector<double> y(a.data().begin(), a.data().end());
  const auto& bd = b.node()->data;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] += bd[j];
  return detail::make_result(
      a.shape(), std::move(y), {&a, &b},
      [an = a.node(), bn = b.node(), r, c](const NodePtr& o) {
        return [an, bn, o = o.get(), r, c] {
          const auto& g = o->grad;
          if (wants(an)) {
            auto ga = an->grad_buffer();
            for (std::size_t i = 0; i < r * c; ++i) ga[i] += g[i];
          }
          if (wants(bn)) {
            auto gb = bn->grad_buffer();
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
          }
        };
      },
      "add_row");
}

// ---- reductions and normalization -------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return detail::make_result(
      {1}, {s}, {&a},
      [an = a.node()](const NodePtr& o) {
        return [an, o = o.get()] {
          auto gx = an->grad_buffer();
          for (auto& v : gx) v += o->grad[0];
        };
      },
      "sum");
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor softmax(const Tensor& a, int axis) {
  require_2d(a, "softmax");
  const bool one_d = a.ndim() == 1;
  if (axis < 0 || axis > 1 || (one_d && axis != 0)) {
    throw DimensionError("softmax: invalid axis " + std::to_string(axis) + " for " + shape_str(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  // Express both axes as: `groups` independent vectors of length `len` with stride.
  const bool along_rows = one_d || axis == 1;
  const std::size_t groups = along_rows ? r : c;
  const std::size_t len = along_rows ? c : r;
  auto index = [=](std::size_t g, std::size_t i) { return along_rows ? g * c + i : i * c + g; };

  const auto& x = a.node()->data;
  std::vector<double> y(x.size());
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, x[index(g, i)]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) z += (y[index(g, i)] = std::exp(x[index(g, i)] - mx));
    for (std::size_t i = 0; i < len; ++i) y[index(g, i)] /= z;
  }
  return detail::make_result(
      a.shape(), std::move(y), {&a},
      [an = a.node(), groups, len, index](const NodePtr& o) {
        return [an, o = o.get(), groups, len, index] {
          const auto& g = o->grad;
          const auto& y = o->data;
          auto gx = an->grad_buffer();
          for (std::size_t k = 0; k < groups; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < len; ++i) dot += g[index(k, i)] * y[index(k, i)];
            for (std::size_t i = 0; i < len; ++i) gx[index(k, i)] += y[index(k, i)] * (g[index(k, i)] - dot);
          }
        };
      },
      "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_2d(x, "layer_norm");
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.size() != c || bias.size() != c) throw DimensionError("layer_norm: gain/bias width mismatch");
  const auto& xd = x.node()->data;
  const auto& gd = gain.node()->data;
  const auto& bd = bias.node()->data;
  std::vector<double> y(r * c), xhat(r * c), inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xd[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xd[i * c + j] - mu) * (xd[i * c + j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xd[i * c + j] - mu) * inv_std[i];
      y[i * c + j] = xhat[i * c + j] * gd[j] + bd[j];
    }
  }
  return detail::make_result(
      x.shape(), std::move(y), {&x, &gain, &bias},
      [xn = x.node(), gn = gain.node(), bn = bias.node(), r, c, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const NodePtr& o) {
        return [xn, gn, bn, o = o.get(), r, c, xhat, inv_std] {
          const auto& g = o->grad;
          if (wants(gn)) {
            auto gg = gn->grad_buffer();
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
          }
          if (wants(bn)) {
            auto gb = bn->grad_buffer();
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
          }
          if (wants(xn)) {
            auto gx = xn->grad_buffer();
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t i = 0; i < r; ++i) {
              double m1 = 0.0, m2 = 0.0;
              for (std::size_t j = 0; j < c; ++j) {
                const double dxh = g[i * c + j] * gn->data[j];
                m1 += dxh;
                m2 += dxh * xhat[i * c + j];
              }
              m1 *= inv_c;
              m2 *= inv_c;
              for (std::size_t j = 0; j < c; ++j) {
                const double dxh = g[i * c + j] * gn->data[j];
                gx[i * c + j] += inv_std[i] * (dxh - m1 - xhat[i * c + j] * m2);
              }
            }
          }
        };
      },
      "layer_norm");
}

Tensor token_nll(const Tensor& logits, std::span<const int> targets) {
  require_2d(logits, "token_nll");
  const std::size_t r = logits.rows(), c = logits.cols();
  if (targets.size() != r) {
    throw DimensionError("token_nll: " + std::to_string(targets.size()) + " targets for " +
                         shape_str(logits.shape()));
  }
  const auto& x = logits.node()->data;
  std::vector<double> out(r, 0.0), probs(r * c, 0.0);
  std::vector<int> tgt(targets.begin(), targets.end());
  for (std::size_t i = 0; i < r; ++i) {
    if (tgt[i] < 0) continue;
    if (static_cast<std::size_t>(tgt[i]) >= c) {
      throw ContractError("token_nll: target " + std::to_string(tgt[i]) + " outside vocabulary of " +
                          std::to_string(c));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (probs[i * c + j] = std::exp(x[i * c + j] - mx));
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    out[i] = mx + std::log(z) - x[i * c + static_cast<std::size_t>(tgt[i])];
  }
  return detail::make_result(
      {r, 1}, std::move(out), {&logits},
      [xn = logits.node(), r, c, tgt = std::move(tgt), probs = std::move(probs)](const NodePtr& o) {
        return [xn, o = o.get(), r, c, tgt, probs] {
          auto gx = xn->grad_buffer();
          for (std::size_t i = 0; i < r; ++i) {
            if (tgt[i] < 0) continue;
            const double g = o->grad[i];
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g * probs[i * c + j];
            gx[i * c + static_cast<std::size_t>(tgt[i])] -= g;
          }
        };
      },
      "token_nll");
}

// ---- structure -------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> y(a.data().begin(), a.data().end());
  return detail::make_result(
      std::move(shape), std::move(y), {&a},
      [an = a.node()](const NodePtr& o) {
        return [an, o = o.get()] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i];
        };
      },
      "reshape");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != r) throw DimensionError("concat_cols: row counts disagree");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> y(r * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    const auto& d = p.node()->data;
    for (std::size_t i = 0; i < r; ++i) std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * w), w, y.begin() + static_cast<std::ptrdiff_t>(i * total + off));
    off += w;
  }
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result(
      {r, total}, std::move(y), parts,
      [nodes, widths, r, total](const NodePtr& o) {
        return [nodes, widths, r, total, o = o.get()] {
          std::size_t off = 0;
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            const std::size_t w = widths[k];
            if (wants(nodes[k])) {
              auto gx = nodes[k]->grad_buffer();
              for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j) gx[i * w + j] += o->grad[i * total + off + j];
            }
            off += w;
          }
        };
      },
      "concat_cols");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<std::size_t> heights;
  std::vector<double> y;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows: column counts disagree");
    heights.push_back(p.rows());
    total += p.rows();
    y.insert(y.end(), p.data().begin(), p.data().end());
  }
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result(
      {total, c}, std::move(y), parts,
      [nodes, c](const NodePtr& o) {
        return [nodes, c, o = o.get()] {
          std::size_t off = 0;
          for (const auto& n : nodes) {
            const std::size_t len = n->data.size();
            if (wants(n)) {
              auto gx = n->grad_buffer();
              for (std::size_t i = 0; i < len; ++i) gx[i] += o->grad[off + i];
            }
            off += len;
          }
          (void)c;
        };
      },
      "concat_rows");
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_cols");
  const std::size_t r = a.rows(), c = a.cols();
  if (begin >= end || end > c) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " +
                         shape_str(a.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> y(r * w);
  const auto& d = a.node()->data;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) y[i * w + j] = d[i * c + begin + j];
  return detail::make_result(
      {r, w}, std::move(y), {&a},
      [an = a.node(), r, c, w, begin](const NodePtr& o) {
        return [an, o = o.get(), r, c, w, begin] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) gx[i * c + begin + j] += o->grad[i * w + j];
        };
      },
      "slice_cols");
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_rows");
  const std::size_t r = a.rows(), c = a.cols();
  if (begin >= end || end > r) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " +
                         shape_str(a.shape()));
  }
  std::vector<double> y(a.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                        a.data().begin() + static_cast<std::ptrdiff_t>(end * c));
  return detail::make_result(
      {end - begin, c}, std::move(y), {&a},
      [an = a.node(), c, begin](const NodePtr& o) {
        return [an, o = o.get(), c, begin] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < o->grad.size(); ++i) gx[begin * c + i] += o->grad[i];
        };
      },
      "slice_rows");
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
  require_2d(a, "gather_rows");
  const std::size_t r = a.rows(), c = a.cols();
  if (indices.empty()) throw ContractError("gather_rows: empty index list");
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t n = idx.size();
  std::vector<double> y(n * c);
  const auto& d = a.node()->data;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of " + shape_str(a.shape()));
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(idx[i] * c), c, y.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return detail::make_result(
      {n, c}, std::move(y), {&a},
      [an = a.node(), c, idx = std::move(idx)](const NodePtr& o) {
        return [an, o = o.get(), c, idx] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) gx[idx[i] * c + j] += o->grad[i * c + j];
        };
      },
      "gather_rows");
}

Tensor avg_pool_rows2(const Tensor& a) {
  require_2d(a, "avg_pool_rows2");
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t out_r = (r + 1) / 2;
  std::vector<double> y(out_r * c, 0.0);
  const auto& d = a.node()->data;
  for (std::size_t i = 0; i < out_r; ++i) {
    const std::size_t r0 = 2 * i, r1 = std::min(2 * i + 1, r - 1);
    const double w = r1 == r0 ? 1.0 : 0.5;
    for (std::size_t j = 0; j < c; ++j) {
      y[i * c + j] = w * d[r0 * c + j] + (r1 == r0 ? 0.0 : w * d[r1 * c + j]);
    }
  }
  return detail::make_result(
      {out_r, c}, std::move(y), {&a},
      [an = a.node(), r, c, out_r](const NodePtr& o) {
        return [an, o = o.get(), r, c, out_r] {
          auto gx = an->grad_buffer();
          for (std::size_t i = 0; i < out_r; ++i) {
            const std::size_t r0 = 2 * i, r1 = std::min(2 * i + 1, r - 1);
            const double w = r1 == r0 ? 1.0 : 0.5;
            for (std::size_t j = 0; j < c; ++j) {
              gx[r0 * c + j] += w * o->grad[i * c + j];
              if (r1 != r0) gx[r1 * c + j] += w * o->grad[i * c + j];
            }
          }
        };
      },
      "avg_pool_rows2");
}

}  // namespace hcap::diff
