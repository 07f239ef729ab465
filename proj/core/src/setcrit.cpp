#include "hcap/setcrit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hcap/diff/ops.hpp"
#include "hcap/error.hpp"

namespace hcap::setcrit {

using diff::Tensor;
using diff::detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

constexpr double kProbEps = 1e-7;

// Rows <= cols. Shortest augmenting path with dual potentials, O(n^2 m).
std::vector<std::size_t> assign_rows(const CostMatrix& a) {
  const std::size_t n = a.rows, m = a.cols;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// Sum of the entries of a column tensor in ascending-value order, so the
// result does not depend on the order rows were produced in.
Tensor ordered_sum(const Tensor& column) {
  const auto values = column.data();
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return diff::sum(diff::gather_rows(column, order));
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) {
    for (std::size_t i = 0; i < cost.rows; ++i) out.unmatched_predictions.push_back(i);
    return out;
  }
  for (double c : cost.values) {
    if (!std::isfinite(c)) throw DomainError("hungarian: cost matrix contains a non-finite entry");
  }
  if (cost.rows <= cost.cols) {
    const auto row_to_col = assign_rows(cost);
    for (std::size_t i = 0; i < cost.rows; ++i) out.pairs.emplace_back(i, row_to_col[i]);
  } else {
    CostMatrix t(cost.cols, cost.rows);
    for (std::size_t i = 0; i < cost.rows; ++i)
      for (std::size_t j = 0; j < cost.cols; ++j) t(j, i) = cost(i, j);
    const auto gt_to_pred = assign_rows(t);
    std::vector<char> matched(cost.rows, 0);
    for (std::size_t j = 0; j < cost.cols; ++j) {
      out.pairs.emplace_back(gt_to_pred[j], j);
      matched[gt_to_pred[j]] = 1;
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    for (std::size_t i = 0; i < cost.rows; ++i) {
      if (!matched[i]) out.unmatched_predictions.push_back(i);
    }
  }
  for (const auto& [i, j] : out.pairs) out.total_cost += cost(i, j);
  return out;
}

double focal_loss(double prob, int label, FocalParams fp) {
  const double p = clamp_prob(prob);
  const double pt = label == 1 ? p : 1.0 - p;
  const double at = label == 1 ? fp.alpha : 1.0 - fp.alpha;
  return -at * std::pow(1.0 - pt, fp.gamma) * std::log(pt);
}

CostMatrix match_cost(std::span<const ScoredSegment> preds, std::span<const Segment> gts, MatchWeights w) {
  CostMatrix c(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double cls = focal_loss(preds[i].confidence, 1);
    for (std::size_t j = 0; j < gts.size(); ++j) {
      c(i, j) = w.alpha_giou * (1.0 - geometry::giou1d(preds[i].segment, gts[j])) + w.alpha_cls * cls;
    }
  }
  return c;
}

Tensor focal_loss(const Tensor& probs, std::span<const int> labels, FocalParams fp) {
  const std::size_t n = probs.size();
  if (labels.size() != n) throw DimensionError("focal_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " probabilities");
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = focal_loss(probs[i], lab[i], fp);
  return diff::detail::make_result(
      {n, 1}, std::move(out), {&probs},
      [pn = probs.node(), lab = std::move(lab), fp](const NodePtr& o) {
        return [pn, o = o.get(), lab, fp] {
          auto gp = pn->grad_buffer();
          for (std::size_t i = 0; i < lab.size(); ++i) {
            const double raw = pn->data[i];
            if (raw < kProbEps || raw > 1.0 - kProbEps) continue;  // clamped: flat
            const double pt = lab[i] == 1 ? raw : 1.0 - raw;
            const double at = lab[i] == 1 ? fp.alpha : 1.0 - fp.alpha;
            const double q = 1.0 - pt;
            // d/dpt of -at q^g log(pt)
            const double dpt = -at * (-fp.gamma * std::pow(q, fp.gamma - 1.0) * std::log(pt) + std::pow(q, fp.gamma) / pt);
            gp[i] += o->grad[i] * (lab[i] == 1 ? dpt : -dpt);
          }
        };
      },
      "focal_loss");
}

Tensor giou_loss(const Tensor& segments, std::span<const std::size_t> pred_rows, std::span<const Segment> gts) {
  if (segments.cols() != 2) throw DimensionError("giou_loss: segments must be [n x 2], got " + diff::shape_str(segments.shape()));
  if (pred_rows.size() != gts.size()) throw DimensionError("giou_loss: row/ground-truth count mismatch");
  if (pred_rows.empty()) throw ContractError("giou_loss: no pairs");
  const std::size_t n = pred_rows.size();
  std::vector<std::size_t> rows(pred_rows.begin(), pred_rows.end());
  std::vector<Segment> targets(gts.begin(), gts.end());
  const auto d = segments.data();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (rows[k] >= segments.rows()) throw DimensionError("giou_loss: row index out of range");
    const Segment p{d[rows[k] * 2], d[rows[k] * 2 + 1]};
    out[k] = 1.0 - geometry::giou1d(p, targets[k]);
  }
  return diff::detail::make_result(
      {n, 1}, std::move(out), {&segments},
      [sn = segments.node(), rows = std::move(rows), targets = std::move(targets)](const NodePtr& o) {
        return [sn, o = o.get(), rows, targets] {
          auto gs = sn->grad_buffer();
          for (std::size_t k = 0; k < rows.size(); ++k) {
            const double s1 = sn->data[rows[k] * 2], e1 = sn->data[rows[k] * 2 + 1];
            const double s2 = targets[k].start, e2 = targets[k].end;
            const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
            const double uni = (e1 - s1) + (e2 - s2) - inter;
            const double hull = std::max(e1, e2) - std::min(s1, s2);
            if (hull <= 0.0 || uni <= 0.0) continue;  // degenerate conventions are flat
            const bool overlap = inter > 0.0;
            const double di_de = overlap && e1 < e2 ? 1.0 : 0.0;
            const double di_ds = overlap && s1 > s2 ? -1.0 : 0.0;
            const double du_de = 1.0 - di_de;
            const double du_ds = -1.0 - di_ds;
            const double dh_de = e1 > e2 ? 1.0 : 0.0;
            const double dh_ds = s1 < s2 ? -1.0 : 0.0;
            // giou = inter/uni - 1 + uni/hull
            auto dgiou = [&](double di, double du, double dh) {
              return (di * uni - inter * du) / (uni * uni) + (du * hull - uni * dh) / (hull * hull);
            };
            const double g = o->grad[k];
            gs[rows[k] * 2] -= g * dgiou(di_ds, du_ds, dh_ds);
            gs[rows[k] * 2 + 1] -= g * dgiou(di_de, du_de, dh_de);
          }
        };
      },
      "giou_loss");
}

Tensor caption_ce(const Tensor& logits, std::span<const int> targets) {
  const auto len = std::count_if(targets.begin(), targets.end(), [](int t) { return t >= 0; });
  if (len == 0) throw ContractError("caption_ce: caption has no tokens");
  return diff::scale(diff::sum(diff::token_nll(logits, targets)), 1.0 / static_cast<double>(len));
}

double caption_ce_value(const Tensor& logits, std::span<const int> targets) {
  return caption_ce(logits, targets).item();
}

SetLossResult set_loss(std::span<const LayerPrediction> layers, std::span<const Segment> gts,
                       const SetCriterion& crit) {
  if (layers.empty()) throw ContractError("set_loss: needs at least one decoder layer");
  SetLossResult result;
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, gts.size()));
  std::vector<Tensor> layer_losses;

  for (const auto& layer : layers) {
    LayerTerms terms;
    if (!layer.segments.defined()) {  // no predictions at all
      Assignment empty;
      result.assignments.push_back(empty);
      result.terms.push_back(terms);
      continue;
    }
    const std::size_t n = layer.segments.rows();
    if (layer.confidence.size() != n) throw DimensionError("set_loss: confidence/segment count mismatch");

    std::vector<ScoredSegment> scored(n);
    const auto sd = layer.segments.data();
    for (std::size_t i = 0; i < n; ++i) scored[i] = {{sd[2 * i], sd[2 * i + 1]}, layer.confidence[i]};
    auto assignment = hungarian(match_cost(scored, gts, crit.match));

    std::vector<int> labels(n, 0);
    for (const auto& [i, j] : assignment.pairs) labels[i] = 1;
    Tensor cls = ordered_sum(focal_loss(layer.confidence, labels, crit.focal));
    terms.cls = cls.item() * norm;
    Tensor total = diff::scale(cls, crit.loss.beta_cls * norm);

    if (!assignment.pairs.empty()) {
      std::vector<std::size_t> rows;
      std::vector<Segment> targets;
      for (const auto& [i, j] : assignment.pairs) {
        rows.push_back(i);
        targets.push_back(gts[j]);
      }
      Tensor giou = ordered_sum(giou_loss(layer.segments, rows, targets));
      terms.giou = giou.item() * norm;
      total = diff::add(total, diff::scale(giou, crit.loss.beta_giou * norm));

      if (layer.caption_loss) {
        auto by_gt = assignment.pairs;
        std::sort(by_gt.begin(), by_gt.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
        Tensor per_pair = layer.caption_loss(by_gt);
        if (per_pair.size() != by_gt.size()) throw DimensionError("set_loss: caption scorer returned wrong count");
        Tensor cap = ordered_sum(diff::reshape(per_pair, {by_gt.size(), 1}));
        terms.cap = cap.item() * norm;
        total = diff::add(total, diff::scale(cap, crit.loss.beta_cap * norm));
      }
    }
    layer_losses.push_back(total);
    result.assignments.push_back(std::move(assignment));
    result.terms.push_back(terms);
  }

  if (layer_losses.empty()) {
    result.loss = Tensor::scalar(0.0);
  } else {
    result.loss = layer_losses[0];
    for (std::size_t l = 1; l < layer_losses.size(); ++l) result.loss = diff::add(result.loss, layer_losses[l]);
  }
  return result;
}

}  // namespace hcap::setcrit
