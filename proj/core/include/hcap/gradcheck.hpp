#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hcap/diff/tensor.hpp"

namespace hcap::gradcheck {

struct Options {
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  double step = 1e-6;
  // Coordinates probed per trial; inputs with fewer scalars are probed fully.
  std::size_t max_coords = 24;
  // Relative error is |a - n| / max(|a|, |n|, abs_floor). Central
  // differences carry ~1e-10 of roundoff at this step, so gradients much
  // below the floor are compared absolutely.
  double abs_floor = 1e-4;
};

struct KernelResult {
  std::string kernel;
  std::size_t trials = 0;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  double seconds = 0.0;
};

/// A differentiable function of some leaf tensors.
struct Probe {
  std::vector<diff::Tensor> inputs;  // leaves with requires_grad
  std::function<diff::Tensor()> loss;  // scalar
};

// Max relative error between tape gradients and central differences over
// (a sample of) the input coordinates.
double check_probe(const Probe& probe, std::mt19937_64& rng, const Options& opt, std::size_t* coords = nullptr);

std::vector<std::string> kernel_names();

// Runs every kernel's trials. `only` restricts to the named kernels.
std::vector<KernelResult> run(const Options& opt, const std::vector<std::string>& only = {});

std::string format_table(const std::vector<KernelResult>& results);

}  // namespace hcap::gradcheck
