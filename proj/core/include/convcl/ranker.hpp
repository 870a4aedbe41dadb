#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convcl/dialog.hpp"
#include "convcl/encoder.hpp"
#include "convcl/layers.hpp"
#include "convcl/tensor.hpp"

namespace convcl {

/// Affinity s^T M a between a dialog state and a candidate action.
struct BilinearScorer {
  ParamId matrix;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;

  static BilinearScorer create(ParamStore& store, std::size_t state_dim, std::size_t action_dim);
  void initialize(ParamStore& store, Rng& rng) const;
};

Tensor score(const BilinearScorer& scorer, const Tensor& state, const Tensor& action);

/// Scores of every candidate as one vector.
Tensor candidate_scores(const BilinearScorer& scorer, const Tensor& state,
                        std::span<const Tensor> candidates);

/// Plackett-Luce probabilities: softmax over the candidate scores.
Tensor candidate_distribution(const BilinearScorer& scorer, const Tensor& state,
                              std::span<const Tensor> candidates);

/// Cross-entropy against a one-hot label: -log p(candidates[truth] | state).
Tensor ranking_loss(const BilinearScorer& scorer, const Tensor& state,
                    std::span<const Tensor> candidates, std::size_t truth);

/// Encodes the truth (at index 0) and distractors of `instance` with the
/// session's encoder and returns the ranking loss against `state`.
Tensor ranking_loss(EncodeSession& session, const BilinearScorer& scorer, const Tensor& state,
                    const RankingInstance& instance);

/// Throws ContractError unless the truth is non-empty, absent from the
/// distractors, and all distractors are distinct.
void validate_instance(const RankingInstance& instance);

/// k distinct actions drawn uniformly without replacement from `inventory`
/// minus `truth`, in draw order.
std::vector<std::string> negative_sample(std::span<const std::string> inventory,
                                         std::string_view truth, std::size_t k, Rng& rng);

/// Argmax with ties broken toward the lowest index.
std::size_t predict(std::span<const double> scores);
std::size_t predict(const BilinearScorer& scorer, const Tensor& state,
                    std::span<const Tensor> candidates);

}  // namespace convcl
