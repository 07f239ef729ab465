#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hcap/metrics.hpp"
#include "hcap/text.hpp"
#include "oracles.hpp"

using namespace hcap::metrics;
using hcap::text::tokenize;

namespace {

Tokens random_sentence(std::mt19937_64& rng, std::size_t lo = 3, std::size_t hi = 9) {
  static const std::vector<std::string> words = {"the", "person", "walks", "away", "turns", "left", "looks",
                                                 "around", "stands", "still", "in", "red", "then", "walking"};
  std::uniform_int_distribution<std::size_t> len(lo, hi), w(0, words.size() - 1);
  Tokens t(len(rng));
  for (auto& x : t) x = words[w(rng)];
  return t;
}

}  // namespace

TEST_CASE("bleu4") {
  const Tokens s = tokenize("the person walks away slowly");
  CHECK(bleu4(s, s) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bleu4(tokenize("the man walks"), tokenize("the man walks away")) ==
        doctest::Approx(std::exp(-1.0 / 3)).epsilon(1e-12));
  CHECK(std::abs(bleu4(tokenize("the man walks"), tokenize("the man walks away")) - 0.7165) < 1e-4);
  CHECK(bleu4(tokenize("a b c d"), tokenize("e f g h")) == 0.0);
  CHECK(bleu4({}, s) == 0.0);
}

TEST_CASE("rouge_l") {
  const Tokens s = tokenize("a b c d");
  CHECK(rouge_l(s, s) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lcs_length(tokenize("a b c d"), tokenize("a c d")) == 3);
  const double p = 3.0 / 4, r = 1.0, b2 = 1.2 * 1.2;
  CHECK(rouge_l(tokenize("a b c d"), tokenize("a c d")) == doctest::Approx((1 + b2) * p * r / (r + b2 * p)).epsilon(1e-14));
  CHECK(rouge_l(tokenize("a b"), tokenize("c d")) == 0.0);
}

TEST_CASE("porter stemmer") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"caresses", "caress"}, {"ponies", "poni"},      {"cats", "cat"},          {"feed", "feed"},
      {"agreed", "agre"},     {"plastered", "plaster"}, {"motoring", "motor"},   {"sing", "sing"},
      {"hopping", "hop"},     {"falling", "fall"},     {"filing", "file"},       {"happy", "happi"},
      {"relational", "relat"}, {"generalization", "gener"}, {"walking", "walk"}, {"walks", "walk"},
      {"running", "run"},     {"looked", "look"},      {"electrical", "electr"}, {"adjustable", "adjust"}};
  for (const auto& [w, s] : cases) {
    INFO(w);
    CHECK(porter_stem(w) == s);
  }
}

TEST_CASE("meteor_lite") {
  for (std::size_t m : {1u, 3u, 5u, 9u}) {
    Tokens s;
    for (std::size_t i = 0; i < m; ++i) s.push_back("w" + std::to_string(i));
    const auto d = meteor_lite_detail(s, s);
    CHECK(d.chunks == 1);
    CHECK(d.score == doctest::Approx(1.0 - 0.5 / static_cast<double>(m * m * m)).epsilon(1e-14));
  }
  CHECK(meteor_lite(tokenize("a b c d e"), tokenize("a b c d e")) == doctest::Approx(0.996).epsilon(1e-12));
  CHECK(meteor_lite(tokenize("a b"), tokenize("c d")) == 0.0);
  CHECK(meteor_lite(tokenize("walks"), tokenize("walking")) > 0.0);
  // Two chunks: "a b" and "d".
  const auto d = meteor_lite_detail(tokenize("a b x d"), tokenize("a b c d"));
  CHECK(d.matches == 3);
  CHECK(d.chunks == 2);
  const double p = 0.75, r = 0.75, f = p * r / (0.9 * p + 0.1 * r);
  CHECK(d.score == doctest::Approx(f * (1 - 0.5 * std::pow(2.0 / 3, 3))).epsilon(1e-14));
}

TEST_CASE("cider_d") {
  std::vector<CaptionPair> same;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto s = random_sentence(rng);
    same.push_back({s, s});
  }
  CHECK(cider_d(same) == doctest::Approx(10.0).epsilon(1e-12));
  // One-item corpus: every n-gram has idf 0, identical n-grams still score.
  std::vector<CaptionPair> one = {{tokenize("a b c"), tokenize("a b c")}};
  CHECK(cider_d(one) == doctest::Approx(10.0).epsilon(1e-12));
  std::vector<CaptionPair> disjoint = {{tokenize("a b c"), tokenize("d e f")}, {tokenize("x y"), tokenize("g h i")}};
  CHECK(cider_d(disjoint) == 0.0);

  const std::vector<Tokens> corpus = {tokenize("the person walks away then turns left"),
                                      tokenize("a person in red stands still"),
                                      tokenize("the man looks around then walks away")};
  const CiderD c(corpus);
  const Tokens cand = tokenize("the person walks away then stands still");
  for (const auto& ref : corpus) CHECK(c.score(cand, ref) == doctest::Approx(oracle::cider_d(cand, ref, corpus)).epsilon(1e-12));

  for (int t = 0; t < 50; ++t) {
    std::vector<Tokens> docs;
    for (int i = 0; i < 4; ++i) docs.push_back(random_sentence(rng));
    const CiderD cd(docs);
    const auto cs = random_sentence(rng);
    CHECK(cd.score(cs, docs[0]) == doctest::Approx(oracle::cider_d(cs, docs[0], docs)).epsilon(1e-12));
  }
}

TEST_CASE("greedy tIoU matching") {
  const std::vector<TimedText> refs = {{{0.0, 0.5}, tokenize("a")}, {{0.5, 1.0}, tokenize("b")}};
  const std::vector<TimedText> preds = {{{0.55, 1.0}, tokenize("b")}, {{0.0, 0.4}, tokenize("a")},
                                        {{0.9, 0.95}, tokenize("c")}};
  const auto m = greedy_tiou_match(preds, refs);
  REQUIRE(m.size() == 2);
  CHECK(m[0].reference == 0);
  CHECK(m[0].prediction == 1);
  CHECK(m[1].reference == 1);
  CHECK(m[1].prediction == 0);
}

TEST_CASE("protocol") {
  std::mt19937_64 rng(5);
  auto make_video = [&](const std::string& id, std::size_t n) {
    VideoEval v;
    v.video_id = id;
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 0.6 * u(rng);
      v.references.push_back({{s, s + 0.1 + 0.3 * u(rng)}, random_sentence(rng, 5, 9)});
    }
    return v;
  };

  SUBCASE("predictions equal to ground truth give identity values") {
    std::vector<VideoEval> corpus;
    for (int i = 0; i < 4; ++i) {
      auto v = make_video("v" + std::to_string(i), 3);
      v.predictions = v.references;
      corpus.push_back(v);
    }
    const auto r = tiou_matched_eval(corpus);
    CHECK(r.thresholds == default_thresholds());
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(r.per_threshold.at("BLEU-4")[k] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.per_threshold.at("ROUGE-L")[k] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.per_threshold.at("CIDEr-D")[k] == doctest::Approx(10.0).epsilon(1e-12));
      CHECK(r.matched[k] == 12);
    }
    double meteor = 0;
    for (const auto& v : corpus)
      for (const auto& ref : v.references) meteor += meteor_lite(ref.tokens, ref.tokens);
    CHECK(r.average.at("METEOR-lite") == doctest::Approx(meteor / 12).epsilon(1e-12));
    CHECK(r.soda_c == doctest::Approx(meteor / 12).epsilon(1e-12));
  }

  SUBCASE("a prediction at tIoU 0.6 matches only at 0.3 and 0.5") {
    VideoEval v;
    v.video_id = "x";
    v.references = {{{0.0, 0.5}, tokenize("a b c d")}};
    v.predictions = {{{0.0, 0.3}, tokenize("a b c d")}};
    const auto r = tiou_matched_eval(std::vector<VideoEval>{v});
    CHECK(r.matched == std::vector<std::size_t>{1, 1, 0, 0});
    CHECK(r.per_threshold.at("BLEU-4")[1] == doctest::Approx(1.0));
    CHECK(r.per_threshold.at("BLEU-4")[2] == 0.0);
  }

  SUBCASE("matched counts are monotone and ordering does not matter") {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<VideoEval> corpus;
      for (int i = 0; i < 3; ++i) {
        auto v = make_video("v" + std::to_string(i), 4);
        std::uniform_real_distribution<double> u(0, 1);
        for (int k = 0; k < 5; ++k) {
          const double s = 0.7 * u(rng);
          v.predictions.push_back({{s, s + 0.05 + 0.25 * u(rng)}, random_sentence(rng)});
        }
        corpus.push_back(v);
      }
      const auto r = tiou_matched_eval(corpus);
      for (std::size_t k = 1; k < r.matched.size(); ++k) CHECK(r.matched[k] <= r.matched[k - 1]);
      auto shuffled = corpus;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (auto& v : shuffled) std::shuffle(v.predictions.begin(), v.predictions.end(), rng);
      CHECK(tiou_matched_eval(shuffled).to_json() == r.to_json());
    }
  }
}

TEST_CASE("soda_c") {
  const std::vector<TimedText> one = {{{0.1, 0.4}, tokenize("a b c d e")}};
  CHECK(soda_c(one, one) == doctest::Approx(meteor_lite(one[0].tokens, one[0].tokens)).epsilon(1e-14));
  const std::vector<TimedText> far = {{{0.6, 0.9}, tokenize("a b c d e")}};
  CHECK(soda_c(one, far) == 0.0);

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> n(0, 5);
  std::uniform_real_distribution<double> u(0, 1);
  auto seq = [&](std::size_t k) {
    std::vector<TimedText> v;
    for (std::size_t i = 0; i < k; ++i) {
      const double s = 0.7 * u(rng);
      v.push_back({{s, s + 0.05 + 0.3 * u(rng)}, random_sentence(rng)});
    }
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.segment.start < b.segment.start; });
    return v;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = seq(n(rng)), r = seq(n(rng));
    REQUIRE(std::abs(soda_total(p, r) - oracle::brute_force_soda(p, r)) <= 1e-12);
  }
}
