#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcap/diff/nn.hpp"
#include "hcap/diff/tensor.hpp"

namespace hcap::diff {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of every tensor in `params` from its grad
// buffer. State is lazily sized on the first call. In checked mode a
// non-finite gradient throws before any parameter is touched.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg);

// Global L2 norm over all gradient buffers.
double grad_norm(std::span<const Tensor> params);

// "HCPT" checkpoint: magic, u16 version, u32 count, then per tensor
// u16 name length, name bytes, u16 ndim, u32 dims, little-endian f64 payload.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::filesystem::path& path);

}  // namespace hcap::diff
