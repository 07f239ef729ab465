#pragma once

// Random inputs shared by unit tests and the acceptance suite.

#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "hcap/diff/tensor.hpp"
#include "hcap/setcrit.hpp"

namespace fixture {

using hcap::diff::Tensor;
using hcap::setcrit::LayerPrediction;
using hcap::setcrit::Segment;

struct Fixture {
  std::vector<Segment> segs;
  std::vector<double> conf;
  std::vector<double> cap;  // caption loss of prediction i paired with gt j: cap[i * G + j]
  std::vector<Segment> gts;
};

inline Fixture random_set_loss_fixture(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n(1, 6), g(0, 5);
  std::uniform_real_distribution<double> u(0, 1);
  Fixture f;
  const auto np = n(rng), ng = g(rng);
  for (std::size_t i = 0; i < np; ++i) {
    const double s = 0.7 * u(rng);
    f.segs.push_back({s, s + 0.05 + 0.25 * u(rng)});
    f.conf.push_back(0.05 + 0.9 * u(rng));
  }
  for (std::size_t j = 0; j < ng; ++j) {
    const double s = 0.7 * u(rng);
    f.gts.push_back({s, s + 0.05 + 0.25 * u(rng)});
  }
  for (std::size_t k = 0; k < np * ng; ++k) f.cap.push_back(3 * u(rng));
  return f;
}

inline double set_loss_of(const Fixture& f, const std::vector<std::size_t>& pperm, const std::vector<std::size_t>& gperm) {
  std::vector<double> sv, cv;
  for (auto i : pperm) {
    sv.push_back(f.segs[i].start);
    sv.push_back(f.segs[i].end);
    cv.push_back(f.conf[i]);
  }
  std::vector<Segment> gts;
  for (auto j : gperm) gts.push_back(f.gts[j]);
  const std::size_t G = f.gts.size();
  LayerPrediction layer;
  layer.segments = Tensor::from({pperm.size(), 2}, sv);
  layer.confidence = Tensor::from({pperm.size(), 1}, cv);
  layer.caption_loss = [&](std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    std::vector<double> out;
    for (auto [i, j] : pairs) out.push_back(f.cap[pperm[i] * G + gperm[j]]);
    return Tensor::from({out.size(), 1}, out);
  };
  std::vector<LayerPrediction> layers{layer, layer};
  return hcap::setcrit::set_loss(layers, gts).loss.item();
}


}  // namespace fixture
