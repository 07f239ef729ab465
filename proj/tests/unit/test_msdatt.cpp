#include <doctest.h>

#include <cmath>
#include <random>

#include "hcap/diff/ops.hpp"
#include "hcap/gradcheck.hpp"
#include "hcap/msdatt.hpp"

using namespace hcap;
using namespace hcap::msdatt;
using diff::Tensor;

namespace {

void set_identity(diff::Linear& l) {
  auto w = l.weight.mutable_data();
  const std::size_t n = l.weight.cols();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (i / n == i % n) ? 1.0 : 0.0;
  for (auto& b : l.bias.mutable_data()) b = 0.0;
}

Tensor random_matrix(diff::Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(diff::numel(s));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(s), std::move(v));
}

}  // namespace

TEST_CASE("sample_linear") {
  Tensor map = Tensor::from({3, 1}, {2, 4, 6});
  CHECK(sample_linear(map, 0.5)[0] == 4.0);
  CHECK(sample_linear(map, 0.25)[0] == 3.0);
  CHECK(sample_linear(map, -0.2)[0] == 0.0);
  CHECK(sample_linear(map, 1.3)[0] == 0.0);
  CHECK(sample_linear(map, 1.0)[0] == 6.0);
}

TEST_CASE("pyramid lengths halve with ceiling") {
  std::mt19937_64 rng(1);
  const auto p = build_pyramid(random_matrix({64, 3}, rng), 4);
  REQUIRE(p.num_levels() == 4);
  CHECK(p.levels[0].rows() == 64);
  CHECK(p.levels[1].rows() == 32);
  CHECK(p.levels[2].rows() == 16);
  CHECK(p.levels[3].rows() == 8);
  const auto odd = build_pyramid(random_matrix({5, 2}, rng), 3);
  CHECK(odd.levels[1].rows() == 3);
  CHECK(odd.levels[2].rows() == 2);
  const auto one = build_pyramid(random_matrix({1, 2}, rng), 4);
  for (const auto& l : one.levels) CHECK(l.rows() == 1);
}

TEST_CASE("single head, level and point with identity maps reads the reference feature") {
  diff::ParameterSet params;
  diff::Rng init(2);
  MultiScaleDeformableAttention attn(params, "a", {2, 1, 1, 1}, init);
  attn.offsets.zero_init();
  set_identity(attn.value);
  set_identity(attn.output);
  Tensor base = Tensor::from({5, 2}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto pyr = build_pyramid(base, 1);
  Tensor q = Tensor::from({2, 2}, {0.3, -0.2, 1.0, 0.5});
  Tensor refs = Tensor::from({2, 1}, {0.5, 0.125});
  const auto out = attn(q, refs, pyr);
  CHECK(out.data()[0] == doctest::Approx(4.0));
  CHECK(out.data()[1] == doctest::Approx(5.0));
  CHECK(out.data()[2] == doctest::Approx(1.0));  // u = 0.5 between rows 0 and 1
  CHECK(out.data()[3] == doctest::Approx(2.0));
}

TEST_CASE("constant feature map gives the same output for any offsets") {
  std::mt19937_64 rng(3);
  diff::ParameterSet params;
  diff::Rng init(4);
  MultiScaleDeformableAttention attn(params, "a", {4, 2, 2, 2}, init);
  for (auto& w : attn.offsets.weight.mutable_data()) w = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  const std::vector<double> c = {0.5, -1.0, 2.0, 0.25};
  std::vector<double> rows;
  for (int t = 0; t < 16; ++t) rows.insert(rows.end(), c.begin(), c.end());
  const auto pyr = build_pyramid(Tensor::from({16, 4}, rows), 2);
  // Keep samples inside the map so zero padding does not kick in.
  Tensor q = random_matrix({3, 4}, rng, -0.2, 0.2);
  Tensor refs = Tensor::from({3, 1}, {0.4, 0.5, 0.6});
  const auto out = attn(q, refs, pyr);
  const auto expect = attn.output(attn.value(Tensor::from({1, 4}, c)));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(out.data()[i * 4 + j] == doctest::Approx(expect.data()[j]).epsilon(1e-12));
}

TEST_CASE("attention weights sum to one per query and head") {
  std::mt19937_64 rng(5);
  diff::ParameterSet params;
  diff::Rng init(6);
  MultiScaleDeformableAttention attn(params, "a", {8, 2, 3, 4}, init);
  for (auto& w : attn.weights.weight.mutable_data()) w = std::normal_distribution<double>(0, 2)(rng);
  const auto a = attn.attention_weights(random_matrix({5, 8}, rng, -3, 3));
  REQUIRE(a.rows() == 10);
  REQUIRE(a.cols() == 12);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) s += a.data()[r * a.cols() + k];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("references far outside the video still give finite values and gradients") {
  std::mt19937_64 rng(7);
  diff::ParameterSet params;
  diff::Rng init(8);
  MultiScaleDeformableAttention attn(params, "a", {4, 2, 2, 2}, init);
  for (auto& b : attn.offsets.bias.mutable_data()) b = 50.0;
  Tensor q = Tensor::from({2, 4}, {0.1, 0.2, 0.3, 0.4, -0.1, 0.0, 0.5, 0.2}, true);
  Tensor base = Tensor::from(random_matrix({6, 4}, rng).shape(), std::vector<double>(24, 1.0), true);
  diff::Tape tape;
  diff::TapeScope scope(tape);
  Tensor loss = diff::sum(attn(q, Tensor::from({2, 1}, {0.95, 1.0}), build_pyramid(base, 2)));
  tape.backward(loss);
  CHECK(std::isfinite(loss.item()));
  for (double g : q.grad()) CHECK(std::isfinite(g));
  for (double g : base.grad()) CHECK(std::isfinite(g));
}

TEST_CASE("dsa with one sampling point returns the sampled value") {
  std::mt19937_64 rng(9);
  diff::ParameterSet params;
  diff::Rng init(10);
  DeformableSoftAttention dsa(params, "d", 3, 4, 2, 1, 1, init);
  dsa.offsets.zero_init();
  const auto pyr = build_pyramid(random_matrix({9, 4}, rng), 1);
  const auto values = dsa.project_values(pyr);
  Tensor refs = Tensor::from({1, 1}, {0.5});
  const auto out = dsa(random_matrix({1, 3}, rng), random_matrix({1, 4}, rng), refs, values);
  const auto at = sample_linear(values.levels[0], 0.5);
  for (std::size_t j = 0; j < 4; ++j) CHECK(out.data()[j] == doctest::Approx(at[j]).epsilon(1e-14));
}

TEST_CASE("dsa with zero query projection averages its samples") {
  std::mt19937_64 rng(11);
  diff::ParameterSet params;
  diff::Rng init(12);
  DeformableSoftAttention dsa(params, "d", 3, 4, 2, 2, 2, init);
  for (auto& w : dsa.query_proj.weight.mutable_data()) w = 0.0;
  for (auto& b : dsa.query_proj.bias.mutable_data()) b = 0.0;
  const auto values = dsa.project_values(build_pyramid(random_matrix({12, 4}, rng), 2));
  Tensor h = random_matrix({2, 3}, rng), q = random_matrix({2, 4}, rng);
  Tensor refs = Tensor::from({2, 1}, {0.3, 0.6});
  const auto out = dsa(h, q, refs, values);
  const auto samples = deform_sample(values.levels, refs, dsa.offsets(diff::concat_cols({h, q})), 1, 2);
  const auto mean = group_weighted_sum(samples, Tensor::full({2, 4}, 0.25));
  for (std::size_t i = 0; i < 8; ++i) CHECK(out.data()[i] == doctest::Approx(mean.data()[i]).epsilon(1e-13));

  SUBCASE("two identical keys split the weight evenly") {
    Tensor s = Tensor::from({2, 2}, {1.0, 2.0, 1.0, 2.0});
    Tensor key = Tensor::from({1, 2}, {0.7, -0.3});
    const auto w = diff::softmax(group_dot(s, key), 1);
    CHECK(w.data()[0] == 0.5);
    CHECK(w.data()[1] == 0.5);
  }
}

TEST_CASE("msdatt, dsa and sampling kernels pass finite differences") {
  gradcheck::Options opt;
  for (const auto& r : gradcheck::run(opt, {"deform_sample", "group_sum/dot", "msdatt", "dsa"})) {
    INFO(r.kernel << " " << r.max_rel_error);
    CHECK(r.max_rel_error < r.tolerance);
    CHECK(r.max_rel_error < 1e-4);
  }
}
