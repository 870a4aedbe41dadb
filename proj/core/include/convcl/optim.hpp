#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace convcl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::size_t num_params) : config(cfg), m(num_params, 0.0), v(num_params, 0.0) {}

  void reset();
};

/// Rescales `grads` in place so its L2 norm is at most `max_norm`. Returns
/// the factor applied (1 when the norm was already small enough). Throws
/// NumericError on a non-finite entry.
double clip_global_norm(std::span<double> grads, double max_norm = 5.0);

/// One bias-corrected Adam update. Mutates `params` and returns the delta
/// that was added, element for element.
std::vector<double> adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace convcl
