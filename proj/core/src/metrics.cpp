#include "hcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "hcap/error.hpp"
#include "hcap/geometry.hpp"
#include "json.hpp"

namespace hcap::metrics {

namespace {

using NgramCounts = std::map<std::string, std::size_t>;

// n-grams keyed by their words joined with a unit separator.
NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::string key = t[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += t[i + k];
    }
    ++out[key];
  }
  return out;
}

std::string threshold_label(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

}  // namespace

// ---- BLEU ------------------------------------------------------------------------

double bleu4(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::size_t match[4] = {}, total[4] = {};
  bool any_zero = false;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto c = ngrams(candidate, n), r = ngrams(reference, n);
    for (const auto& [g, cnt] : c) {
      total[n - 1] += cnt;
      if (auto it = r.find(g); it != r.end()) match[n - 1] += std::min(cnt, it->second);
    }
    if (match[n - 1] == 0) any_zero = true;
  }
  if (match[0] == 0) return 0.0;
  double log_p = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double m = static_cast<double>(match[n]), t = static_cast<double>(total[n]);
    if (any_zero && n > 0) {
      m += 1.0;
      t += 1.0;
    }
    log_p += std::log(m / t);
  }
  const double c = static_cast<double>(candidate.size()), r = static_cast<double>(reference.size());
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_p / 4.0);
}

// ---- ROUGE-L ---------------------------------------------------------------------

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  constexpr double beta2 = 1.2 * 1.2;
  return (1.0 + beta2) * p * r / (r + beta2 * p);
}

// ---- METEOR-lite -----------------------------------------------------------------

MeteorDetail meteor_lite_detail(const Tokens& candidate, const Tokens& reference) {
  MeteorDetail d;
  if (candidate.empty() || reference.empty()) return d;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> align(candidate.size(), kNone);
  std::vector<bool> used(reference.size(), false);

  // One greedy pass per matching stage. Among admissible reference
  // positions, continuing the previous candidate's chunk wins; otherwise the
  // earliest free position.
  auto stage = [&](auto&& same) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (align[i] != kNone) continue;
      std::size_t pick = kNone;
      if (i > 0 && align[i - 1] != kNone) {
        const auto next = align[i - 1] + 1;
        if (next < reference.size() && !used[next] && same(i, next)) pick = next;
      }
      for (std::size_t j = 0; pick == kNone && j < reference.size(); ++j) {
        if (!used[j] && same(i, j)) pick = j;
      }
      if (pick != kNone) {
        align[i] = pick;
        used[pick] = true;
      }
    }
  };
  stage([&](std::size_t i, std::size_t j) { return candidate[i] == reference[j]; });
  std::vector<std::string> cs(candidate.size()), rs(reference.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) cs[i] = porter_stem(candidate[i]);
  for (std::size_t j = 0; j < reference.size(); ++j) rs[j] = porter_stem(reference[j]);
  stage([&](std::size_t i, std::size_t j) { return cs[i] == rs[j]; });

  std::size_t prev_i = kNone, prev_j = kNone;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] == kNone) continue;
    ++d.matches;
    if (prev_i == kNone || i != prev_i + 1 || align[i] != prev_j + 1) ++d.chunks;
    prev_i = i;
    prev_j = align[i];
  }
  if (d.matches == 0) return d;
  const double m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(candidate.size());
  d.recall = m / static_cast<double>(reference.size());
  constexpr double alpha = 0.9, beta = 3.0, gamma = 0.5;
  d.fmean = d.precision * d.recall / (alpha * d.precision + (1.0 - alpha) * d.recall);
  d.penalty = gamma * std::pow(static_cast<double>(d.chunks) / m, beta);
  d.score = d.fmean * (1.0 - d.penalty);
  return d;
}

double meteor_lite(const Tokens& candidate, const Tokens& reference) {
  return meteor_lite_detail(candidate, reference).score;
}

// ---- CIDEr-D ---------------------------------------------------------------------

CiderD::CiderD(std::span<const Tokens> reference_corpus, double sigma)
    : log_n_(std::log(std::max<double>(1.0, static_cast<double>(reference_corpus.size())))), sigma_(sigma) {
  for (const auto& ref : reference_corpus) {
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& [g, _] : ngrams(ref, n)) ++df_[std::to_string(n) + g];
    }
  }
}

double CiderD::idf(const std::string& key) const {
  auto it = df_.find(key);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return log_n_ - std::log(std::max(1.0, df));
}

double CiderD::score(const Tokens& candidate, const Tokens& reference) const {
  const double delta = static_cast<double>(candidate.size()) - static_cast<double>(reference.size());
  const double length_penalty = std::exp(-delta * delta / (2.0 * sigma_ * sigma_));
  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto c = ngrams(candidate, n), r = ngrams(reference, n);
    auto weight = [&](const std::string& g, std::size_t count) {
      return static_cast<double>(count) * idf(std::to_string(n) + g);
    };
    double dot = 0.0, nc = 0.0, nr = 0.0;
    for (const auto& [g, cnt] : c) nc += weight(g, cnt) * weight(g, cnt);
    for (const auto& [g, cnt] : r) {
      const double wr = weight(g, cnt);
      nr += wr * wr;
      if (auto it = c.find(g); it != c.end()) dot += std::min(weight(g, it->second), wr) * wr;
    }
    double sim;
    if (nc == 0.0 || nr == 0.0) {
      // Degenerate tf-idf vectors (n-grams shared by every document, or both
      // captions too short for this order): fall back to exact equality of
      // the n-gram multisets, or of the captions when there are no n-grams.
      sim = c == r && (!c.empty() || candidate == reference) ? 1.0 : 0.0;
    } else {
      sim = dot / (std::sqrt(nc) * std::sqrt(nr));
    }
    total += sim * length_penalty;
  }
  return 10.0 * total / 4.0;
}

std::vector<double> cider_d_scores(std::span<const CaptionPair> pairs) {
  std::vector<Tokens> refs;
  refs.reserve(pairs.size());
  for (const auto& p : pairs) refs.push_back(p.reference);
  const CiderD cider(refs);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(cider.score(p.candidate, p.reference));
  return out;
}

double cider_d(std::span<const CaptionPair> pairs) {
  if (pairs.empty()) return 0.0;
  const auto s = cider_d_scores(pairs);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

// ---- protocol --------------------------------------------------------------------

std::vector<MatchedPair> greedy_tiou_match(std::span<const TimedText> preds, std::span<const TimedText> refs) {
  struct Candidate {
    double tiou;
    std::size_t ref;
    std::size_t pred;
  };
  std::vector<Candidate> cands;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < refs.size(); ++g) {
      const double t = geometry::tiou(preds[p].segment, refs[g].segment);
      if (t > 0.0) cands.push_back({t, g, p});
    }
  }
  auto pred_key = [&](std::size_t p) {
    return std::tie(preds[p].segment.start, preds[p].segment.end, preds[p].tokens);
  };
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.tiou != b.tiou) return a.tiou > b.tiou;
    if (a.ref != b.ref) return a.ref < b.ref;
    return pred_key(a.pred) < pred_key(b.pred);
  });
  std::vector<bool> pred_used(preds.size(), false), ref_used(refs.size(), false);
  std::vector<MatchedPair> out;
  for (const auto& c : cands) {
    if (pred_used[c.pred] || ref_used[c.ref]) continue;
    pred_used[c.pred] = ref_used[c.ref] = true;
    out.push_back({c.pred, c.ref, c.tiou});
  }
  std::sort(out.begin(), out.end(), [](const MatchedPair& a, const MatchedPair& b) { return a.reference < b.reference; });
  return out;
}

double soda_total(std::span<const TimedText> preds, std::span<const TimedText> refs) {
  const auto n = preds.size(), m = refs.size();
  std::vector<double> dp((n + 1) * (m + 1), 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double t = geometry::tiou(preds[i - 1].segment, refs[j - 1].segment);
      const double s = t > 0.0 ? t * meteor_lite(preds[i - 1].tokens, refs[j - 1].tokens) : 0.0;
      at(i, j) = std::max({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1) + s});
    }
  }
  return at(n, m);
}

double soda_c(std::span<const TimedText> preds, std::span<const TimedText> refs) {
  if (preds.empty() && refs.empty()) return 1.0;
  if (preds.empty() || refs.empty()) return 0.0;
  auto by_start = [](std::span<const TimedText> s) {
    std::vector<TimedText> v(s.begin(), s.end());
    std::stable_sort(v.begin(), v.end(), [](const TimedText& a, const TimedText& b) {
      return std::tie(a.segment.start, a.segment.end) < std::tie(b.segment.start, b.segment.end);
    });
    return v;
  };
  const auto p = by_start(preds), r = by_start(refs);
  const double total = soda_total(p, r);
  if (total <= 0.0) return 0.0;
  const double precision = total / static_cast<double>(p.size());
  const double recall = total / static_cast<double>(r.size());
  return 2.0 * precision * recall / (precision + recall);
}

EvalReport tiou_matched_eval(std::span<const VideoEval> corpus, std::span<const double> thresholds) {
  EvalReport rep;
  rep.thresholds.assign(thresholds.begin(), thresholds.end());
  rep.videos = corpus.size();
  const auto& names = metric_names();
  for (const auto& name : names) rep.per_threshold[name].assign(thresholds.size(), 0.0);
  rep.matched.assign(thresholds.size(), 0);

  std::vector<Tokens> all_refs;
  for (const auto& v : corpus) {
    rep.predictions += v.predictions.size();
    rep.references += v.references.size();
    for (const auto& r : v.references) all_refs.push_back(r.tokens);
  }
  if (rep.references == 0) rep.diagnostics.push_back("no ground-truth segments: all scores are 0");
  if (rep.predictions == 0) rep.diagnostics.push_back("no predictions: all scores are 0");
  const CiderD cider(all_refs);

  // Sorted so that corpus order cannot change the result.
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corpus[a].video_id < corpus[b].video_id; });

  std::map<std::string, std::vector<double>> sums;
  for (const auto& name : names) sums[name].assign(thresholds.size(), 0.0);
  double soda_sum = 0.0;
  for (auto vi : order) {
    const auto& v = corpus[vi];
    const auto matches = greedy_tiou_match(v.predictions, v.references);
    // Per-pair scores once; thresholds only select among them.
    std::vector<std::array<double, 4>> pair_scores;
    for (const auto& mp : matches) {
      const auto& c = v.predictions[mp.prediction].tokens;
      const auto& r = v.references[mp.reference].tokens;
      pair_scores.push_back({bleu4(c, r), meteor_lite(c, r), cider.score(c, r), rouge_l(c, r)});
    }
    const double denom = static_cast<double>(v.predictions.size());
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      std::array<double, 4> video_sum{};
      for (std::size_t k = 0; k < matches.size(); ++k) {
        if (matches[k].tiou < thresholds[ti]) continue;
        ++rep.matched[ti];
        for (std::size_t mi = 0; mi < 4; ++mi) video_sum[mi] += pair_scores[k][mi];
      }
      for (std::size_t mi = 0; mi < 4; ++mi) {
        sums[names[mi]][ti] += video_sum[mi];
        rep.rows.push_back({v.video_id, names[mi], threshold_label(thresholds[ti]),
                            denom > 0 ? video_sum[mi] / denom : 0.0});
      }
    }
    const double sc = soda_c(v.predictions, v.references);
    soda_sum += sc;
    rep.rows.push_back({v.video_id, "SODA_c", "-", sc});
  }
  if (rep.references > 0 && rep.predictions > 0) {
    for (const auto& name : names) {
      for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
        rep.per_threshold[name][ti] = sums[name][ti] / static_cast<double>(rep.predictions);
      }
    }
  }
  for (const auto& name : names) {
    const auto& v = rep.per_threshold[name];
    rep.average[name] = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  rep.soda_c = rep.references > 0 && !corpus.empty() ? soda_sum / static_cast<double>(corpus.size()) : 0.0;
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["thresholds"] = thresholds;
  j["videos"] = videos;
  j["predictions"] = predictions;
  j["references"] = references;
  j["matched_pairs"] = matched;
  auto& m = j["metrics"];
  for (const auto& name : metric_names()) {
    nlohmann::ordered_json e;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    const auto& scores = per_threshold.at(name);
    for (std::size_t i = 0; i < thresholds.size(); ++i) per[threshold_label(thresholds[i])] = scores[i];
    e["per_threshold"] = per;
    e["average"] = average.at(name);
    m[name] = e;
  }
  j["SODA_c"] = soda_c;
  j["diagnostics"] = diagnostics;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_tsv() const {
  std::ostringstream os;
  os.precision(17);
  os << "video_id\tmetric\tthreshold\tscore\n";
  for (const auto& r : rows) os << r.video_id << '\t' << r.metric << '\t' << r.threshold << '\t' << r.score << '\n';
  return os.str();
}

}  // namespace hcap::metrics
