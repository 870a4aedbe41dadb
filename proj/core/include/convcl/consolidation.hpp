#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "convcl/param_store.hpp"
#include "convcl/tensor.hpp"

namespace convcl {

/// How per-parameter importance is estimated between tasks.
///  - PathIntegral: undecayed running sums of -g * dtheta and dtheta.
///  - Adaptive: the same sums with exponential decay `decay` applied every step.
///  - Fisher: mean squared log-likelihood gradient at the end of the task.
enum class ConsolidationMode { Off, PathIntegral, Adaptive, Fisher };

std::string_view to_string(ConsolidationMode mode);
ConsolidationMode parse_consolidation_mode(std::string_view text);

struct ConsolidationConfig {
  ConsolidationMode mode = ConsolidationMode::Off;
  double c = 0.01;        // weight of the quadratic surrogate
  double decay = 0.999;   // lambda, used by Adaptive only
  double damping = 1e-3;  // zeta

  friend bool operator==(const ConsolidationConfig&, const ConsolidationConfig&) = default;
};

struct FisherAccumulator {
  std::vector<double> sum_sq;
  std::size_t count = 0;

  void update(std::span<const double> grads);
  void reset();

  friend bool operator==(const FisherAccumulator&, const FisherAccumulator&) = default;
};

/// Per-scalar-parameter bookkeeping aligned with ParamStore flat indexing.
class ConsolidationState {
 public:
  ConsolidationState() = default;
  ConsolidationState(ConsolidationConfig config, std::size_t num_params);

  [[nodiscard]] const ConsolidationConfig& config() const { return config_; }
  void set_config(const ConsolidationConfig& config) { config_ = config; }
  [[nodiscard]] std::size_t size() const { return omega_.size(); }

  /// Records one optimizer step. `task_grads` is the gradient of the task
  /// loss alone and `step` the update that was actually applied.
  void on_step(std::span<const double> task_grads, std::span<const double> step);

  /// Adds a log-likelihood gradient sample to the Fisher accumulator.
  void fisher_update(std::span<const double> grads);

  /// Folds this task's contribution into the accumulated importance, moves
  /// the anchor to `theta` and clears the running sums.
  void on_task_end(std::span<const double> theta);

  /// c * sum_k importance_k * (anchor_k - theta_k)^2 recorded on theta's tape.
  /// `theta` must be a flat vector over all parameters. Zero (a constant)
  /// before the first task boundary.
  [[nodiscard]] Tensor surrogate_penalty(const Tensor& theta) const;
  [[nodiscard]] double penalty_value(std::span<const double> theta) const;

  [[nodiscard]] bool anchored() const { return !anchor_.empty(); }
  [[nodiscard]] std::size_t steps_in_task() const { return steps_in_task_; }
  [[nodiscard]] std::span<const double> omega() const { return omega_; }
  [[nodiscard]] std::span<const double> delta() const { return delta_; }
  [[nodiscard]] std::span<const double> importance() const { return importance_; }
  [[nodiscard]] std::span<const double> anchor() const { return anchor_; }
  [[nodiscard]] const FisherAccumulator& fisher() const { return fisher_; }

  /// Restores every array, e.g. from a checkpoint. Sizes must agree.
  void restore(std::vector<double> omega, std::vector<double> delta, std::vector<double> importance,
               std::vector<double> anchor);

  friend bool operator==(const ConsolidationState&, const ConsolidationState&) = default;

 private:
  void check_size(std::span<const double> values, const char* what) const;

  ConsolidationConfig config_;
  std::vector<double> omega_;
  std::vector<double> delta_;
  std::vector<double> importance_;
  std::vector<double> anchor_;
  FisherAccumulator fisher_;
  std::size_t steps_in_task_ = 0;
};

/// Writes one row per scalar parameter: name, index within the parameter,
/// flat index, and accumulated importance. Tab separated with a header.
void export_importance(const ConsolidationState& state, const ParamStore& store,
                       const std::filesystem::path& path);

}  // namespace convcl
