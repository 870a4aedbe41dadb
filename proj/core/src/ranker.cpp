#include "convcl/ranker.hpp"

#include <algorithm>
#include <set>

#include "convcl/errors.hpp"

namespace convcl {

BilinearScorer BilinearScorer::create(ParamStore& store, std::size_t state_dim, std::size_t action_dim) {
  BilinearScorer scorer;
  scorer.state_dim = state_dim;
  scorer.action_dim = action_dim;
  scorer.matrix = store.add("ranker.bilinear", {state_dim, action_dim});
  return scorer;
}

void BilinearScorer::initialize(ParamStore& store, Rng& rng) const {
  const auto m = orthogonal_init(state_dim, action_dim, rng);
  auto dst = store.values(matrix);
  std::copy(m.begin(), m.end(), dst.begin());
}

namespace {

void check_state(const BilinearScorer& scorer, const Tensor& state) {
  if (state.rank() != 1 || state.size() != scorer.state_dim) {
    throw DimensionError("scorer expects state of dim " + std::to_string(scorer.state_dim) + ", got " +
                         shape_to_string(state.shape()));
  }
}

void check_action(const BilinearScorer& scorer, const Tensor& action) {
  if (action.rank() != 1 || action.size() != scorer.action_dim) {
    throw DimensionError("scorer expects action of dim " + std::to_string(scorer.action_dim) + ", got " +
                         shape_to_string(action.shape()));
  }
}

}  // namespace

Tensor score(const BilinearScorer& scorer, const Tensor& state, const Tensor& action) {
  check_state(scorer, state);
  check_action(scorer, action);
  return matmul(matmul(state, state.tape().param(scorer.matrix)), action);
}

Tensor candidate_scores(const BilinearScorer& scorer, const Tensor& state,
                        std::span<const Tensor> candidates) {
  if (candidates.empty()) throw DomainError("no candidates to score");
  check_state(scorer, state);
  // s^T M once, then one dot product per candidate.
  const Tensor projected = matmul(state, state.tape().param(scorer.matrix));
  std::vector<Tensor> scores;
  scores.reserve(candidates.size());
  for (const Tensor& a : candidates) {
    check_action(scorer, a);
    scores.push_back(matmul(projected, a));
  }
  return stack(scores);
}

Tensor candidate_distribution(const BilinearScorer& scorer, const Tensor& state,
                              std::span<const Tensor> candidates) {
  return softmax(candidate_scores(scorer, state, candidates));
}

Tensor ranking_loss(const BilinearScorer& scorer, const Tensor& state,
                    std::span<const Tensor> candidates, std::size_t truth) {
  if (truth >= candidates.size()) {
    throw ContractError("truth index " + std::to_string(truth) + " not among " +
                        std::to_string(candidates.size()) + " candidates");
  }
  const Tensor scores = candidate_scores(scorer, state, candidates);
  return sub(logsumexp(scores), pick(scores, truth));
}

void validate_instance(const RankingInstance& instance) {
  if (instance.truth.empty()) throw ContractError("instance '" + instance.dialog_id + "' has no truth action");
  std::set<std::string_view> seen{instance.truth};
  for (const auto& d : instance.distractors) {
    if (!seen.insert(d).second) {
      throw ContractError("instance '" + instance.dialog_id + "' turn " + std::to_string(instance.turn) +
                          ": candidate repeated or equal to truth: " + d);
    }
  }
}

Tensor ranking_loss(EncodeSession& session, const BilinearScorer& scorer, const Tensor& state,
                    const RankingInstance& instance) {
  validate_instance(instance);
  std::vector<Tensor> candidates;
  candidates.reserve(instance.distractors.size() + 1);
  candidates.push_back(session.embed_utterance(instance.truth));
  for (const auto& d : instance.distractors) candidates.push_back(session.embed_utterance(d));
  return ranking_loss(scorer, state, candidates, 0);
}

std::vector<std::string> negative_sample(std::span<const std::string> inventory,
                                         std::string_view truth, std::size_t k, Rng& rng) {
  std::vector<std::string> pool;
  std::set<std::string_view> seen;
  for (const auto& a : inventory) {
    if (a != truth && seen.insert(a).second) pool.push_back(a);
  }
  if (pool.size() < k) {
    throw SamplingError("negative_sample: need " + std::to_string(k) + " distractors but only " +
                        std::to_string(pool.size()) + " actions differ from the truth");
  }
  // Partial Fisher-Yates: the first k slots end up a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick_index(i, pool.size() - 1);
    std::swap(pool[i], pool[pick_index(rng)]);
  }
  pool.resize(k);
  return pool;
}

std::size_t predict(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("predict over zero candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t predict(const BilinearScorer& scorer, const Tensor& state, std::span<const Tensor> candidates) {
  const Tensor scores = candidate_scores(scorer, state, candidates);
  return predict(scores.values());
}

}  // namespace convcl
