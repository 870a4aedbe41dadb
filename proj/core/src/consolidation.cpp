#include "convcl/consolidation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>

#include "convcl/errors.hpp"

namespace convcl {

std::string_view to_string(ConsolidationMode mode) {
  switch (mode) {
    case ConsolidationMode::Off: return "off";
    case ConsolidationMode::PathIntegral: return "path_integral";
    case ConsolidationMode::Adaptive: return "adaptive";
    case ConsolidationMode::Fisher: return "fisher";
  }
  return "off";
}

ConsolidationMode parse_consolidation_mode(std::string_view text) {
  for (auto mode : {ConsolidationMode::Off, ConsolidationMode::PathIntegral, ConsolidationMode::Adaptive,
                    ConsolidationMode::Fisher}) {
    if (to_string(mode) == text) return mode;
  }
  throw ConfigError("unknown consolidation mode '" + std::string(text) + "'");
}

void FisherAccumulator::update(std::span<const double> grads) {
  if (sum_sq.size() != grads.size()) {
    throw AlignmentError("fisher_update: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(sum_sq.size()) + " parameters");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) sum_sq[k] += grads[k] * grads[k];
  ++count;
}

void FisherAccumulator::reset() {
  std::fill(sum_sq.begin(), sum_sq.end(), 0.0);
  count = 0;
}

ConsolidationState::ConsolidationState(ConsolidationConfig config, std::size_t num_params)
    : config_(config), omega_(num_params, 0.0), delta_(num_params, 0.0), importance_(num_params, 0.0) {
  if (config_.decay <= 0.0 || config_.decay > 1.0) throw ConfigError("decay must lie in (0, 1]");
  if (config_.damping <= 0.0) throw ConfigError("damping must be positive");
  if (config_.c < 0.0) throw ConfigError("surrogate weight c must be non-negative");
  fisher_.sum_sq.assign(num_params, 0.0);
}

void ConsolidationState::check_size(std::span<const double> values, const char* what) const {
  if (values.size() != omega_.size()) {
    throw AlignmentError(std::string(what) + ": got " + std::to_string(values.size()) +
                         " entries for " + std::to_string(omega_.size()) + " parameters");
  }
}

void ConsolidationState::on_step(std::span<const double> task_grads, std::span<const double> step) {
  check_size(task_grads, "on_step gradients");
  check_size(step, "on_step update");
  ++steps_in_task_;
  switch (config_.mode) {
    case ConsolidationMode::PathIntegral:
      for (std::size_t k = 0; k < omega_.size(); ++k) {
        omega_[k] = omega_[k] - task_grads[k] * step[k];
        delta_[k] = delta_[k] + step[k];
      }
      break;
    case ConsolidationMode::Adaptive: {
      const double decay = config_.decay;
      for (std::size_t k = 0; k < omega_.size(); ++k) {
        omega_[k] = decay * omega_[k] - task_grads[k] * step[k];
        delta_[k] = decay * delta_[k] + step[k];
      }
      break;
    }
    case ConsolidationMode::Off:
    case ConsolidationMode::Fisher:
      break;
  }
}

void ConsolidationState::fisher_update(std::span<const double> grads) { fisher_.update(grads); }

void ConsolidationState::on_task_end(std::span<const double> theta) {
  check_size(theta, "on_task_end parameters");
  switch (config_.mode) {
    case ConsolidationMode::PathIntegral:
    case ConsolidationMode::Adaptive:
      for (std::size_t k = 0; k < omega_.size(); ++k) {
        // A negative contribution means moving this parameter raised the loss.
        importance_[k] += std::max(omega_[k], 0.0) / (delta_[k] * delta_[k] + config_.damping);
      }
      break;
    case ConsolidationMode::Fisher:
      if (fisher_.count > 0) {
        const double n = static_cast<double>(fisher_.count);
        for (std::size_t k = 0; k < omega_.size(); ++k) importance_[k] += fisher_.sum_sq[k] / n;
      }
      break;
    case ConsolidationMode::Off:
      break;
  }
  anchor_.assign(theta.begin(), theta.end());
  std::fill(omega_.begin(), omega_.end(), 0.0);
  std::fill(delta_.begin(), delta_.end(), 0.0);
  fisher_.reset();
  steps_in_task_ = 0;
}

Tensor ConsolidationState::surrogate_penalty(const Tensor& theta) const {
  Tape& tape = theta.tape();
  if (theta.rank() != 1 || theta.size() != omega_.size()) {
    throw AlignmentError("surrogate_penalty: theta " + shape_to_string(theta.shape()) + " for " +
                         std::to_string(omega_.size()) + " parameters");
  }
  if (!anchored() || config_.mode == ConsolidationMode::Off) return tape.scalar(0.0);
  const std::size_t n = omega_.size();
  const Tensor diff = sub(theta, tape.constant(anchor_, {n}));
  const Tensor weighted = mul(mul(diff, diff), tape.constant(importance_, {n}));
  return scale(sum(weighted), config_.c);
}

double ConsolidationState::penalty_value(std::span<const double> theta) const {
  check_size(theta, "penalty_value");
  if (!anchored() || config_.mode == ConsolidationMode::Off) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double d = anchor_[k] - theta[k];
    total += importance_[k] * d * d;
  }
  return config_.c * total;
}

void ConsolidationState::restore(std::vector<double> omega, std::vector<double> delta,
                                 std::vector<double> importance, std::vector<double> anchor) {
  const std::size_t n = omega.size();
  if (delta.size() != n || importance.size() != n || (!anchor.empty() && anchor.size() != n)) {
    throw AlignmentError("consolidation restore: array sizes disagree");
  }
  omega_ = std::move(omega);
  delta_ = std::move(delta);
  importance_ = std::move(importance);
  anchor_ = std::move(anchor);
  fisher_.sum_sq.assign(n, 0.0);
  fisher_.count = 0;
  steps_in_task_ = 0;
}

void export_importance(const ConsolidationState& state, const ParamStore& store,
                       const std::filesystem::path& path) {
  if (state.size() != store.size()) {
    throw AlignmentError("export_importance: state has " + std::to_string(state.size()) +
                         " entries, store has " + std::to_string(store.size()));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write importance snapshot to " + path.string());
  out << "param\tindex\tflat_index\timportance\n";
  const auto importance = state.importance();
  char buf[32];
  for (const auto& info : store.infos()) {
    for (std::size_t i = 0; i < info.size; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", importance[info.offset + i]);
      out << info.name << '\t' << i << '\t' << info.offset + i << '\t' << buf << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace convcl
