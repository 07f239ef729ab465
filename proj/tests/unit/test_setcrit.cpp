#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hcap/diff/ops.hpp"
#include "hcap/gradcheck.hpp"
#include "hcap/setcrit.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace hcap;
using namespace hcap::setcrit;
using diff::Tensor;

TEST_CASE("hungarian hand cases") {
  CostMatrix diag(3, 3, 1.0);
  for (std::size_t i = 0; i < 3; ++i) diag(i, i) = 0.0;
  auto a = hungarian(diag);
  CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}, {2, 2}});

  CostMatrix c(3, 3);
  c.values = {4, 1, 3, 2, 0, 5, 3, 2, 2};
  auto b = hungarian(c);
  CHECK(b.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}, {2, 2}});
  CHECK(b.total_cost == 5.0);
}

TEST_CASE("hungarian rectangular and empty") {
  CostMatrix wide(2, 4);
  wide.values = {5, 1, 9, 9, 1, 5, 9, 9};
  auto w = hungarian(wide);
  CHECK(w.total_cost == 2.0);
  CHECK(w.unmatched_predictions.empty());
  CostMatrix tall(3, 1);
  tall.values = {3, 1, 2};
  auto t = hungarian(tall);
  CHECK(t.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}});
  CHECK(t.unmatched_predictions == std::vector<std::size_t>{0, 2});
  CHECK(hungarian(CostMatrix(2, 0)).unmatched_predictions.size() == 2);
}

TEST_CASE("hungarian equals exhaustive search on random matrices up to 7x7") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  std::uniform_real_distribution<double> val(0, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    CostMatrix c(dim(rng), dim(rng));
    for (auto& v : c.values) v = val(rng);
    const auto a = hungarian(c);
    REQUIRE(a.pairs.size() == std::min(c.rows, c.cols));
    REQUIRE(std::abs(a.total_cost - oracle::brute_force_assignment(c)) <= 1e-9);
  }
}

TEST_CASE("focal loss scalar cases") {
  CHECK(focal_loss(0.9, 1) == doctest::Approx(-0.25 * 0.01 * std::log(0.9)).epsilon(1e-12));
  CHECK(focal_loss(0.9, 1) == doctest::Approx(2.634e-4).epsilon(1e-3));
  CHECK(focal_loss(0.5, 0) == doctest::Approx(0.12997).epsilon(1e-4));
  CHECK(focal_loss(1.0 - 1e-9, 1) < 1e-12);
  // gamma 0, alpha 0.5 is half the cross-entropy.
  for (double p : {0.1, 0.4, 0.8}) {
    CHECK(focal_loss(p, 1, {0.5, 0.0}) == doctest::Approx(-0.5 * std::log(p)).epsilon(1e-14));
    CHECK(focal_loss(p, 0, {0.5, 0.0}) == doctest::Approx(-0.5 * std::log(1 - p)).epsilon(1e-14));
  }
}

TEST_CASE("caption cross-entropy") {
  SUBCASE("uniform logits give ln V per token") {
    for (std::size_t t : {1u, 3u, 7u}) {
      Tensor logits = Tensor::zeros({t, 50});
      std::vector<int> targets(t, 7);
      CHECK(caption_ce_value(logits, targets) == doctest::Approx(std::log(50.0)).epsilon(1e-14));
    }
  }
  SUBCASE("margin drives the loss to zero") {
    double prev = 1e9;
    for (double m : {1.0, 5.0, 20.0}) {
      Tensor logits = Tensor::from({1, 3}, {0, m, 0});
      const double v = caption_ce_value(logits, std::vector<int>{1});
      CHECK(v < prev);
      prev = v;
    }
    CHECK(prev < 1e-8);
  }
  SUBCASE("T=3, V=4 hand computation") {
    const std::vector<double> l = {1, 2, 0, -1, 0.5, 0.5, 0.5, 0.5, -2, 3, 1, 0};
    const std::vector<int> targets = {1, 3, 0};
    double expect = 0.0;
    for (int t = 0; t < 3; ++t) {
      double z = 0;
      for (int v = 0; v < 4; ++v) z += std::exp(l[t * 4 + v]);
      expect += -(l[t * 4 + targets[t]] - std::log(z));
    }
    expect /= 3.0;
    CHECK(caption_ce_value(Tensor::from({3, 4}, l), targets) == doctest::Approx(expect).epsilon(1e-14));
    // A padded position does not count.
    CHECK(caption_ce_value(Tensor::from({3, 4}, l), std::vector<int>{1, 3, -1}) ==
          doctest::Approx((expect * 3 - (-(l[8] - std::log(std::exp(-2) + std::exp(3) + std::exp(1) + 1)))) / 2)
              .epsilon(1e-13));
  }
}

TEST_CASE("match cost") {
  const std::vector<ScoredSegment> preds = {{{0.2, 0.5}, 0.9}, {{0.0, 0.2}, 0.5}};
  const std::vector<Segment> gts = {{0.4, 0.8}, {0.8, 1.0}};
  const auto c = match_cost(preds, gts);
  CHECK(c(0, 0) == doctest::Approx(2 * (1 - 1.0 / 6) + focal_loss(0.9, 1)).epsilon(1e-14));
  CHECK(c(1, 1) == doctest::Approx(2 * (1 + 0.6) + focal_loss(0.5, 1)).epsilon(1e-14));
  const auto same = match_cost(std::vector<ScoredSegment>{{{0.4, 0.8}, 1.0 - 1e-9}}, gts);
  CHECK(same(0, 0) < 1e-8);
  // Without the class term the ordering follows 1 - gIoU.
  const auto geo = match_cost(preds, gts, {2.0, 0.0});
  CHECK((geo(0, 0) < geo(0, 1)) == (geometry::giou1d(preds[0].segment, gts[0]) > geometry::giou1d(preds[0].segment, gts[1])));
}


TEST_CASE("set_loss is exactly invariant under permutations") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = fixture::random_set_loss_fixture(rng);
    std::vector<std::size_t> p(f.segs.size()), g(f.gts.size());
    std::iota(p.begin(), p.end(), 0);
    std::iota(g.begin(), g.end(), 0);
    const double base = fixture::set_loss_of(f, p, g);
    std::shuffle(p.begin(), p.end(), rng);
    std::shuffle(g.begin(), g.end(), rng);
    REQUIRE(fixture::set_loss_of(f, p, g) == base);
  }
}

TEST_CASE("set_loss composition") {
  SUBCASE("perfect predictions have near-zero loss") {
    LayerPrediction l;
    l.segments = Tensor::from({1, 2}, {0.2, 0.6});
    l.confidence = Tensor::from({1, 1}, {1.0 - 1e-9});
    l.caption_loss = [](auto pairs) { return Tensor::zeros({pairs.size(), 1}); };
    CHECK(set_loss(std::vector<LayerPrediction>{l}, std::vector<Segment>{{0.2, 0.6}}).loss.item() < 1e-6);
  }
  SUBCASE("two predictions, one ground truth") {
    LayerPrediction l;
    l.segments = Tensor::from({2, 2}, {0.2, 0.5, 0.0, 0.2});
    l.confidence = Tensor::from({2, 1}, {0.9, 0.5});
    l.caption_loss = [](auto pairs) { return Tensor::full({pairs.size(), 1}, 1.5); };
    const std::vector<Segment> gt = {{0.4, 0.8}};
    const auto r = set_loss(std::vector<LayerPrediction>{l}, gt);
    REQUIRE(r.assignments[0].pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}});
    const double expect = 2 * (1 - 1.0 / 6) + (focal_loss(0.9, 1) + focal_loss(0.5, 0)) + 1.5;
    CHECK(r.loss.item() == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("every layer contributes") {
    LayerPrediction a, b;
    a.segments = Tensor::from({1, 2}, {0.2, 0.5});
    a.confidence = Tensor::from({1, 1}, {0.6});
    b.segments = Tensor::from({1, 2}, {0.1, 0.3});
    b.confidence = Tensor::from({1, 1}, {0.3});
    const std::vector<Segment> gt = {{0.4, 0.8}};
    const double one = set_loss(std::vector<LayerPrediction>{b}, gt).loss.item();
    const double two = set_loss(std::vector<LayerPrediction>{a, b}, gt).loss.item();
    CHECK(two > one);
  }
}

TEST_CASE("loss kernels pass finite differences") {
  gradcheck::Options opt;
  for (const auto& r : gradcheck::run(opt, {"focal_loss", "giou_loss", "caption_loss"})) {
    INFO(r.kernel << " " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("set_loss gradient w.r.t. segments and confidences on a 3-person fixture") {
  std::mt19937_64 rng(12);
  Tensor seg = Tensor::from({3, 2}, {0.1, 0.35, 0.3, 0.7, 0.55, 0.9}, true);
  Tensor logit = Tensor::from({3, 1}, {0.4, -0.3, 1.1}, true);
  Tensor cap = Tensor::from({3, 3}, {0.2, 1.0, 0.7, 1.3, 0.4, 0.9, 0.5, 0.8, 0.1}, true);
  const std::vector<Segment> gts = {{0.05, 0.3}, {0.35, 0.75}, {0.5, 0.95}};
  gradcheck::Probe probe{{seg, logit, cap}, [=] {
                           LayerPrediction l;
                           l.segments = seg;
                           l.confidence = diff::sigmoid(logit);
                           l.caption_loss = [&](std::span<const std::pair<std::size_t, std::size_t>> pairs) {
                             std::vector<Tensor> rows;
                             for (auto [i, j] : pairs)
                               rows.push_back(diff::slice_cols(diff::slice_rows(cap, i, i + 1), j, j + 1));
                             return diff::concat_rows(rows);
                           };
                           return set_loss(std::vector<LayerPrediction>{l}, gts).loss;
                         }};
  CHECK(gradcheck::check_probe(probe, rng, {}) < 1e-4);
}
