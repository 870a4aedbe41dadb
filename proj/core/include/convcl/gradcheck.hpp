#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "convcl/param_store.hpp"
#include "convcl/tensor.hpp"

namespace convcl {

/// |a - b| / max(|a|, |b|, floor). Central differences at step 1e-5 resolve
/// a gradient to roughly 1e-11 absolute.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Records a scalar loss from the given leaves.
using LeafLoss = std::function<Tensor(Tape&, std::span<const Tensor>)>;

/// Largest relative error between backward and central differences over
/// every entry of every input.
double leaf_gradient_error(const std::vector<std::vector<double>>& inputs, const std::vector<Shape>& shapes,
                           const LeafLoss& loss, double step = 1e-5);

/// Same for selected flat indices of a parameter store; `loss` must bind
/// parameters through the tape it receives.
double param_gradient_error(ParamStore& store, const std::function<Tensor(Tape&)>& loss,
                            std::span<const std::size_t> flat_indices, double step = 1e-5);

struct GradcheckResult {
  std::string name;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Randomized checks of every differentiable primitive, the LSTM step, the
/// full encoder and ranker at small sizes, and the consolidation penalty.
std::vector<GradcheckResult> run_gradient_suite(std::uint64_t seed, std::size_t trials, double step = 1e-5,
                                                double tolerance = 1e-4);

}  // namespace convcl
