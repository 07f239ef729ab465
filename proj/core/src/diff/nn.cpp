#include "hcap/diff/nn.hpp"

#include <algorithm>
#include <cmath>

#include "hcap/diff/ops.hpp"
#include "hcap/error.hpp"

namespace hcap::diff {

Tensor& ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  if (!value.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf tensor");
  value.node()->requires_grad = true;
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).get(name));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

void ParameterSet::assign(const std::vector<std::pair<std::string, Tensor>>& other) {
  if (other.size() != entries_.size()) {
    throw FormatError("checkpoint holds " + std::to_string(other.size()) + " tensors, model expects " +
                      std::to_string(entries_.size()));
  }
  for (const auto& [name, value] : other) {
    auto& dst = get(name);
    if (dst.shape() != value.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(value.shape()) + ", model expects " +
                        shape_str(dst.shape()));
    }
    std::copy(value.data().begin(), value.data().end(), dst.mutable_data().begin());
  }
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform({fan_in, fan_out}, -a, a, rng);
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor normal(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(params.add(name + ".weight", xavier_uniform(in, out, rng))),
      bias(params.add(name + ".bias", Tensor::zeros({1, out}))) {}

Tensor Linear::operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

void Linear::zero_init(double bias_value) {
  std::fill(weight.mutable_data().begin(), weight.mutable_data().end(), 0.0);
  std::fill(bias.mutable_data().begin(), bias.mutable_data().end(), bias_value);
}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, std::size_t width)
    : gain(params.add(name + ".gain", Tensor::full({1, width}, 1.0))),
      bias(params.add(name + ".bias", Tensor::zeros({1, width}))) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }

}  // namespace hcap::diff
