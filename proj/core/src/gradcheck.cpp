#include "hcap/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "hcap/diff/nn.hpp"
#include "hcap/diff/ops.hpp"
#include "hcap/error.hpp"
#include "hcap/model.hpp"
#include "hcap/msdatt.hpp"
#include "hcap/setcrit.hpp"

namespace hcap::gradcheck {

using diff::Tensor;
using Rng = std::mt19937_64;

namespace {

double uni(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor leaf(diff::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(diff::numel(shape));
  for (auto& x : v) x = uni(rng, lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Values bounded away from 0 (kinks of relu, clamp, ...).
Tensor leaf_away(diff::Shape shape, Rng& rng, double gap) {
  std::vector<double> v(diff::numel(shape));
  for (auto& x : v) {
    const double m = uni(rng, gap, 1.5);
    x = uni(rng, 0, 1) < 0.5 ? -m : m;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

// sum(t * R) with a fixed random R, so every output coordinate matters.
Tensor weighted(const Tensor& t, const Tensor& r) { return diff::sum(diff::mul(t, r)); }
Tensor weights_like(const Tensor& t, Rng& rng) {
  std::vector<double> v(t.size());
  for (auto& x : v) x = uni(rng, -1, 1);
  return Tensor::from(t.shape(), std::move(v));
}

diff::Shape small_matrix(Rng& rng) { return {pick(rng, 1, 4), pick(rng, 1, 5)}; }

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.feature_dim = 6;
  c.person_dim = 5;
  c.d_model = 8;
  c.ffn_dim = 12;
  c.enc_layers = 1;
  c.dec_layers = 2;
  c.heads = 2;
  c.levels = 2;
  c.points = 2;
  c.lstm_hidden = 6;
  c.embed_dim = 4;
  c.attn_dim = 4;
  c.vocab_size = 9;
  c.max_caption_len = 6;
  return c;
}

// Zero-initialized heads would hide parts of the gradient; jitter everything.
void jitter(diff::ParameterSet& params, Rng& rng, double scale = 0.2) {
  for (auto& [name, t] : params.entries()) {
    auto copy = t;
    for (auto& x : copy.mutable_data()) x += uni(rng, -scale, scale);
  }
}

std::vector<Tensor> with_params(const diff::ParameterSet& params, std::vector<Tensor> extra) {
  auto all = params.tensors();
  all.insert(all.end(), extra.begin(), extra.end());
  return all;
}

using Factory = std::function<Probe(Rng&)>;

struct Kernel {
  std::string name;
  double tolerance;
  Factory make;
};

Probe binary_probe(Rng& rng, diff::BinaryOp op) {
  const auto shape = small_matrix(rng);
  const auto variant = pick(rng, 0, 2);
  Tensor a = leaf(variant == 2 ? diff::Shape{1} : shape, rng);
  Tensor b = leaf(variant == 1 ? diff::Shape{1} : shape, rng);
  Tensor r = weights_like(Tensor::zeros(shape), rng);
  return {{a, b}, [=] { return weighted(diff::elementwise(op, a, b), r); }};
}

Probe unary_probe(Rng& rng, diff::UnaryOp op) {
  const auto shape = small_matrix(rng);
  Tensor x = op == diff::UnaryOp::log ? leaf(shape, rng, 0.1, 3.0)
             : op == diff::UnaryOp::relu ? leaf_away(shape, rng, 0.01)
                                          : leaf(shape, rng, -2.0, 2.0);
  Tensor r = weights_like(x, rng);
  return {{x}, [=] { return weighted(diff::elementwise(op, x), r); }};
}

struct Models {
  static model::CaptionModel make(Rng& rng) {
    model::CaptionModel m(tiny_config(), rng());
    jitter(m.params(), rng);
    return m;
  }
};

std::vector<Kernel> kernels() {
  std::vector<Kernel> k;
  constexpr double op_tol = 1e-5, module_tol = 1e-4, composite_tol = 1e-3;
  k.push_back({"add", op_tol, [](Rng& r) { return binary_probe(r, diff::BinaryOp::add); }});
  k.push_back({"sub", op_tol, [](Rng& r) { return binary_probe(r, diff::BinaryOp::sub); }});
  k.push_back({"mul", op_tol, [](Rng& r) { return binary_probe(r, diff::BinaryOp::mul); }});
  k.push_back({"sigmoid", op_tol, [](Rng& r) { return unary_probe(r, diff::UnaryOp::sigmoid); }});
  k.push_back({"tanh", op_tol, [](Rng& r) { return unary_probe(r, diff::UnaryOp::tanh); }});
  k.push_back({"relu", op_tol, [](Rng& r) { return unary_probe(r, diff::UnaryOp::relu); }});
  k.push_back({"exp", op_tol, [](Rng& r) { return unary_probe(r, diff::UnaryOp::exp); }});
  k.push_back({"log", op_tol, [](Rng& r) { return unary_probe(r, diff::UnaryOp::log); }});
  k.push_back({"neg", op_tol, [](Rng& r) { return unary_probe(r, diff::UnaryOp::neg); }});
  k.push_back({"matmul", op_tol, [](Rng& rng) {
                 const auto m = pick(rng, 1, 4), kk = pick(rng, 1, 4), n = pick(rng, 1, 4);
                 Tensor a = leaf({m, kk}, rng), b = leaf({kk, n}, rng);
                 Tensor r = weights_like(Tensor::zeros({m, n}), rng);
                 return Probe{{a, b}, [=] { return weighted(diff::matmul(a, b), r); }};
               }});
  k.push_back({"transpose", op_tol, [](Rng& rng) {
                 Tensor a = leaf(small_matrix(rng), rng);
                 Tensor r = weights_like(diff::transpose(a), rng);
                 return Probe{{a}, [=] { return weighted(diff::transpose(a), r); }};
               }});
  k.push_back({"scale/add_scalar", op_tol, [](Rng& rng) {
                 Tensor a = leaf(small_matrix(rng), rng);
                 const double f = uni(rng, -2, 2), o = uni(rng, -1, 1);
                 Tensor r = weights_like(a, rng);
                 return Probe{{a}, [=] { return weighted(diff::add_scalar(diff::scale(a, f), o), r); }};
               }});
  k.push_back({"clamp", op_tol, [](Rng& rng) {
                 Tensor a = leaf_away(small_matrix(rng), rng, 0.01);
                 // Bounds at +-0.5 keep every value at least 0.01 from a kink.
                 auto d = a.mutable_data();
                 for (auto& x : d) {
                   if (std::abs(std::abs(x) - 0.5) < 0.01) x += 0.05;
                 }
                 Tensor r = weights_like(a, rng);
                 return Probe{{a}, [=] { return weighted(diff::clamp(a, -0.5, 0.5), r); }};
               }});
  k.push_back({"add_row", op_tol, [](Rng& rng) {
                 const auto s = small_matrix(rng);
                 Tensor a = leaf(s, rng), b = leaf({1, s[1]}, rng);
                 Tensor r = weights_like(a, rng);
                 return Probe{{a, b}, [=] { return weighted(diff::add_row(a, b), r); }};
               }});
  k.push_back({"sum/mean", op_tol, [](Rng& rng) {
                 Tensor a = leaf(small_matrix(rng), rng);
                 const double w = uni(rng, -2, 2);
                 return Probe{{a}, [=] { return diff::add(diff::sum(a), diff::scale(diff::mean(a), w)); }};
               }});
  k.push_back({"softmax", op_tol, [](Rng& rng) {
                 Tensor a = leaf(small_matrix(rng), rng, -3, 3);
                 const int axis = static_cast<int>(pick(rng, 0, 1));
                 Tensor r = weights_like(a, rng);
                 return Probe{{a}, [=] { return weighted(diff::softmax(a, axis), r); }};
               }});
  k.push_back({"layer_norm", op_tol, [](Rng& rng) {
                 const auto m = pick(rng, 1, 4), n = pick(rng, 2, 6);
                 Tensor x = leaf({m, n}, rng, -2, 2), g = leaf({1, n}, rng, 0.5, 1.5), b = leaf({1, n}, rng);
                 Tensor r = weights_like(x, rng);
                 return Probe{{x, g, b}, [=] { return weighted(diff::layer_norm(x, g, b), r); }};
               }});
  k.push_back({"token_nll", op_tol, [](Rng& rng) {
                 const auto m = pick(rng, 1, 5), v = pick(rng, 2, 6);
                 Tensor x = leaf({m, v}, rng, -3, 3);
                 std::vector<int> t(m);
                 for (auto& y : t) y = static_cast<int>(pick(rng, 0, v)) - (pick(rng, 0, 4) == 0 ? static_cast<int>(v) + 1 : 0);
                 for (auto& y : t) y = std::min(y, static_cast<int>(v) - 1);
                 Tensor r = weights_like(Tensor::zeros({m, 1}), rng);
                 return Probe{{x}, [=] { return weighted(diff::token_nll(x, t), r); }};
               }});
  k.push_back({"reshape/concat/slice", op_tol, [](Rng& rng) {
                 const auto m = pick(rng, 2, 4), n = pick(rng, 2, 4);
                 Tensor a = leaf({m, n}, rng), b = leaf({m, pick(rng, 1, 3)}, rng), c = leaf({pick(rng, 1, 3), n}, rng);
                 return Probe{{a, b, c}, [=, r = weights_like(Tensor::zeros({m * n, 1}), rng)] {
                                Tensor cols = diff::slice_cols(diff::concat_cols({a, b}), 1, n + 1);
                                Tensor rows = diff::slice_rows(diff::concat_rows({cols, c}), 0, m);
                                return weighted(diff::reshape(diff::mul(rows, a), {m * n, 1}), r);
                              }};
               }});
  k.push_back({"gather_rows", op_tol, [](Rng& rng) {
                 const auto m = pick(rng, 1, 4);
                 Tensor a = leaf({m, pick(rng, 1, 4)}, rng);
                 std::vector<std::size_t> idx(pick(rng, 1, 6));
                 for (auto& i : idx) i = pick(rng, 0, m - 1);
                 Tensor r = weights_like(diff::gather_rows(a, idx), rng);
                 return Probe{{a}, [=] { return weighted(diff::gather_rows(a, idx), r); }};
               }});
  k.push_back({"avg_pool_rows2", op_tol, [](Rng& rng) {
                 Tensor a = leaf({pick(rng, 1, 7), pick(rng, 1, 4)}, rng);
                 Tensor r = weights_like(diff::avg_pool_rows2(a), rng);
                 return Probe{{a}, [=] { return weighted(diff::avg_pool_rows2(a), r); }};
               }});
  k.push_back({"deform_sample", op_tol, [](Rng& rng) {
                 const std::size_t heads = 2, points = 2, nq = pick(rng, 1, 3);
                 Tensor base = leaf({pick(rng, 5, 9), 4}, rng);
                 Tensor refs = leaf({nq, 1}, rng, 0.3, 0.7);
                 Tensor offs = leaf({nq, heads * 2 * points}, rng, -1.5, 1.5);
                 return Probe{{base, refs, offs}, [=, r = Tensor()]() mutable {
                                const auto pyr = msdatt::build_pyramid(base, 2);
                                Tensor out = msdatt::deform_sample(pyr.levels, refs, offs, heads, points);
                                if (!r.defined()) {
                                  Rng local(out.size());
                                  r = weights_like(out, local);
                                }
                                return weighted(out, r);
                              }};
               }});
  k.push_back({"group_sum/dot", op_tol, [](Rng& rng) {
                 const auto g = pick(rng, 1, 3), p = pick(rng, 1, 4), c = pick(rng, 1, 4);
                 Tensor s = leaf({g * p, c}, rng), w = leaf({g, p}, rng), key = leaf({g, c}, rng);
                 Tensor r1 = weights_like(Tensor::zeros({g, c}), rng), r2 = weights_like(Tensor::zeros({g, p}), rng);
                 return Probe{{s, w, key}, [=] {
                                return diff::add(weighted(msdatt::group_weighted_sum(s, w), r1),
                                                 weighted(msdatt::group_dot(s, key), r2));
                              }};
               }});
  k.push_back({"msdatt", module_tol, [](Rng& rng) {
                 auto params = std::make_shared<diff::ParameterSet>();
                 diff::Rng init(rng());
                 auto attn = std::make_shared<msdatt::MultiScaleDeformableAttention>(
                     *params, "attn", msdatt::DeformableConfig{8, 2, 2, 2}, init);
                 jitter(*params, rng);
                 const auto nq = pick(rng, 1, 3);
                 Tensor q = leaf({nq, 8}, rng), refs = leaf({nq, 1}, rng, 0.3, 0.7), base = leaf({7, 8}, rng);
                 Tensor r = weights_like(Tensor::zeros({nq, 8}), rng);
                 return Probe{with_params(*params, {q, refs, base}), [=] {
                                return weighted((*attn)(q, refs, msdatt::build_pyramid(base, 2)), r);
                              }};
               }});
  k.push_back({"dsa", module_tol, [](Rng& rng) {
                 auto params = std::make_shared<diff::ParameterSet>();
                 diff::Rng init(rng());
                 auto dsa = std::make_shared<msdatt::DeformableSoftAttention>(*params, "dsa", 6, 8, 4, 2, 2, init);
                 jitter(*params, rng);
                 const auto nq = pick(rng, 1, 3);
                 Tensor h = leaf({nq, 6}, rng), q = leaf({nq, 8}, rng), refs = leaf({nq, 1}, rng, 0.3, 0.7);
                 Tensor base = leaf({7, 8}, rng);
                 Tensor r = weights_like(Tensor::zeros({nq, 8}), rng);
                 return Probe{with_params(*params, {h, q, refs, base}), [=] {
                                return weighted((*dsa)(h, q, refs, dsa->project_values(msdatt::build_pyramid(base, 2))), r);
                              }};
               }});
  k.push_back({"lstm_cell", module_tol, [](Rng& rng) {
                 auto m = std::make_shared<model::CaptionModel>(Models::make(rng));
                 const auto& c = m->config();
                 const auto n = pick(rng, 1, 3);
                 Tensor h = leaf({n, c.lstm_hidden}, rng), cell = leaf({n, c.lstm_hidden}, rng);
                 Tensor q = leaf({n, c.d_model}, rng), rl = leaf({n, 1}, rng), base = leaf({7, c.d_model}, rng);
                 std::vector<int> words(n);
                 for (auto& w : words) w = static_cast<int>(pick(rng, 0, c.vocab_size - 1));
                 Tensor r1 = weights_like(h, rng), r2 = weights_like(cell, rng);
                 Tensor r3 = weights_like(Tensor::zeros({n, c.vocab_size}), rng);
                 return Probe{with_params(m->params(), {h, cell, q, rl, base}), [=] {
                                const auto values = m->caption_values(msdatt::build_pyramid(base, c.levels));
                                auto [st, logits] = m->caption_step({h, cell}, q, diff::sigmoid(rl), words, values);
                                return diff::add(diff::add(weighted(st.h, r1), weighted(st.c, r2)), weighted(logits, r3));
                              }};
               }});
  k.push_back({"localization_head", module_tol, [](Rng& rng) {
                 auto m = std::make_shared<model::CaptionModel>(Models::make(rng));
                 const auto n = pick(rng, 1, 4);
                 Tensor q = leaf({n, m->config().d_model}, rng), rl = leaf({n, 1}, rng);
                 Tensor r1 = weights_like(Tensor::zeros({n, 2}), rng), r2 = weights_like(Tensor::zeros({n, 1}), rng);
                 return Probe{with_params(m->params(), {q, rl}), [=] {
                                const auto out = m->localize({q, rl});
                                return diff::add(weighted(out.segments, r1), weighted(out.confidence, r2));
                              }};
               }});
  k.push_back({"focal_loss", module_tol, [](Rng& rng) {
                 const auto n = pick(rng, 1, 8);
                 Tensor p = leaf({n, 1}, rng, 0.02, 0.98);
                 std::vector<int> labels(n);
                 for (auto& l : labels) l = static_cast<int>(pick(rng, 0, 1));
                 Tensor r = weights_like(p, rng);
                 return Probe{{p}, [=] { return weighted(setcrit::focal_loss(p, labels), r); }};
               }});
  k.push_back({"giou_loss", module_tol, [](Rng& rng) {
                 const auto n = pick(rng, 1, 5);
                 std::vector<double> v;
                 for (std::size_t i = 0; i < n; ++i) {
                   const double s = uni(rng, 0, 0.6);
                   v.push_back(s);
                   v.push_back(s + uni(rng, 0.05, 0.4));
                 }
                 Tensor seg = Tensor::from({n, 2}, v, true);
                 std::vector<std::size_t> rows;
                 std::vector<geometry::Segment> gts;
                 for (std::size_t i = 0; i < n; ++i) {
                   if (pick(rng, 0, 3) == 0) continue;
                   rows.push_back(i);
                   const double s = uni(rng, 0, 0.7);
                   gts.push_back({s, s + uni(rng, 0.05, 0.3)});
                 }
                 if (rows.empty()) {
                   rows.push_back(0);
                   gts.push_back({0.2, 0.5});
                 }
                 Tensor r = weights_like(Tensor::zeros({rows.size(), 1}), rng);
                 return Probe{{seg}, [=] { return weighted(setcrit::giou_loss(seg, rows, gts), r); }};
               }});
  k.push_back({"caption_loss", module_tol, [](Rng& rng) {
                 const auto t = pick(rng, 1, 6), v = pick(rng, 2, 8);
                 Tensor logits = leaf({t, v}, rng, -3, 3);
                 std::vector<int> targets(t);
                 for (auto& y : targets) y = static_cast<int>(pick(rng, 0, v - 1));
                 for (std::size_t i = 1; i < t; ++i) {
                   if (pick(rng, 0, 4) == 0) targets[i] = -1;
                 }
                 return Probe{{logits}, [=] { return setcrit::caption_ce(logits, targets); }};
               }});
  k.push_back({"set_loss", composite_tol, [](Rng& rng) {
                 auto m = std::make_shared<model::CaptionModel>(Models::make(rng));
                 const auto& c = m->config();
                 auto video = std::make_shared<model::VideoInput>();
                 auto target = std::make_shared<model::VideoTarget>();
                 video->frames = leaf({pick(rng, 6, 10), c.feature_dim}, rng);
                 const auto persons = pick(rng, 1, 3);
                 for (std::size_t i = 0; i < persons; ++i) {
                   model::PersonInput p;
                   for (std::size_t j = 0; j < c.person_dim; ++j) p.feature.push_back(uni(rng, -1, 1));
                   const double s = uni(rng, 0, 0.5);
                   p.track = {s, s + uni(rng, 0.1, 0.5)};
                   video->persons.push_back(p);
                 }
                 for (std::size_t g = 0; g < pick(rng, 1, persons); ++g) {
                   const double s = uni(rng, 0, 0.6);
                   target->segments.push_back({s, s + uni(rng, 0.1, 0.4)});
                   std::vector<int> cap(pick(rng, 1, 4));
                   for (auto& w : cap) w = static_cast<int>(pick(rng, 4, c.vocab_size - 1));
                   cap.push_back(2);
                   target->captions.push_back(cap);
                 }
                 return Probe{with_params(m->params(), {video->frames}),
                              [=] { return m->loss(*video, *target, setcrit::SetCriterion{}).loss; }};
               }});
  return k;
}

}  // namespace

double check_probe(const Probe& probe, Rng& rng, const Options& opt, std::size_t* coords) {
  for (auto t : probe.inputs) t.zero_grad();
  {
    diff::Tape tape;
    diff::TapeScope scope(tape);
    Tensor loss = probe.loss();
    if (!loss.requires_grad()) throw ContractError("gradcheck: loss does not depend on the probe inputs");
    tape.backward(loss);
  }
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (input, coordinate)
  std::size_t total = 0;
  for (const auto& t : probe.inputs) total += t.size();
  if (total <= opt.max_coords) {
    for (std::size_t i = 0; i < probe.inputs.size(); ++i)
      for (std::size_t j = 0; j < probe.inputs[i].size(); ++j) picks.emplace_back(i, j);
  } else {
    // Non-parameter inputs come last; make sure each of them is probed.
    while (picks.size() < opt.max_coords) {
      std::size_t g = pick(rng, 0, total - 1), i = 0;
      while (g >= probe.inputs[i].size()) g -= probe.inputs[i++].size();
      picks.emplace_back(i, g);
    }
    for (std::size_t i = probe.inputs.size(); i-- > 0 && picks.size() < 2 * opt.max_coords;) {
      if (probe.inputs[i].size() * 4 > total) break;
      picks.emplace_back(i, pick(rng, 0, probe.inputs[i].size() - 1));
    }
  }

  diff::NoGradScope no_grad;
  double worst = 0.0;
  for (auto [i, j] : picks) {
    Tensor t = probe.inputs[i];
    auto d = t.mutable_data();
    const double x0 = d[j];
    d[j] = x0 + opt.step;
    const double fp = probe.loss().item();
    d[j] = x0 - opt.step;
    const double fm = probe.loss().item();
    d[j] = x0;
    const double numeric = (fp - fm) / (2.0 * opt.step);
    const double analytic = t.grad()[j];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.abs_floor});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  if (coords) *coords += picks.size();
  return worst;
}

std::vector<std::string> kernel_names() {
  std::vector<std::string> out;
  for (const auto& k : kernels()) out.push_back(k.name);
  return out;
}

std::vector<KernelResult> run(const Options& opt, const std::vector<std::string>& only) {
  diff::CheckedScope checked(true);
  std::vector<KernelResult> out;
  Rng rng(opt.seed);
  for (const auto& k : kernels()) {
    if (!only.empty() && std::find(only.begin(), only.end(), k.name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    KernelResult res{k.name, opt.trials, 0, 0.0, k.tolerance, false, 0.0};
    Rng krng(rng());
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const Probe probe = k.make(krng);
      res.max_rel_error = std::max(res.max_rel_error, check_probe(probe, krng, opt, &res.coords));
    }
    res.pass = res.max_rel_error < res.tolerance;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(res);
  }
  return out;
}

std::string format_table(const std::vector<KernelResult>& results) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "kernel" << std::right << std::setw(8) << "trials" << std::setw(9) << "coords"
     << std::setw(14) << "max_rel_err" << std::setw(11) << "tolerance" << std::setw(9) << "seconds" << "  result\n";
  for (const auto& r : results) {
    os << std::left << std::setw(22) << r.kernel << std::right << std::setw(8) << r.trials << std::setw(9) << r.coords
       << std::setw(14) << std::scientific << std::setprecision(3) << r.max_rel_error << std::setw(11)
       << std::setprecision(0) << r.tolerance << std::fixed << std::setw(9) << std::setprecision(2) << r.seconds
       << "  " << (r.pass ? "PASS" : "FAIL") << "\n";
    os.unsetf(std::ios::floatfield);
  }
  return os.str();
}

}  // namespace hcap::gradcheck
