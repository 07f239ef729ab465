#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hcap/diff/tensor.hpp"

namespace hcap::diff {

/// Named, ordered collection of learnable leaves. Registration order is the
/// checkpoint order and the optimizer order.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;

  void zero_grad();
  // Copies values from `other` by name; shapes must agree.
  void assign(const std::vector<std::pair<std::string, Tensor>>& other);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

using Rng = std::mt19937_64;

// Xavier/Glorot uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);
Tensor normal(Shape shape, double stddev, Rng& rng);

/// y = x W + b, with W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }
  // Zero weights and the given bias values (used for offset/refinement heads).
  void zero_init(double bias_value = 0.0);
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, std::size_t width);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace hcap::diff
