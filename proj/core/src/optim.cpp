#include "convcl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convcl/errors.hpp"

namespace convcl {

void AdamState::reset() {
  std::fill(m.begin(), m.end(), 0.0);
  std::fill(v.begin(), v.end(), 0.0);
  t = 0;
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw DomainError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient " + std::to_string(grads[i]) + " at flat index " +
                         std::to_string(i));
    }
    sq += grads[i] * grads[i];
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (double& g : grads) g *= factor;
  return factor;
}

std::vector<double> adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw AlignmentError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(state.m.size()) +
                         " moment slots");
  }
  const auto& c = state.config;
  ++state.t;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  std::vector<double> delta(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    delta[i] = -c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    params[i] += delta[i];
  }
  return delta;
}

}  // namespace convcl
