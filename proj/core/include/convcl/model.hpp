#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "convcl/consolidation.hpp"
#include "convcl/encoder.hpp"
#include "convcl/optim.hpp"
#include "convcl/ranker.hpp"
#include "convcl/vocab.hpp"

namespace convcl {

/// Encoder, ranker and the parameter store they share. Pinned in memory
/// because the encoder refers to the vocabulary member.
class ConversationModel {
 public:
  ConversationModel(const EncoderConfig& config, Vocab vocab);
  ConversationModel(const ConversationModel&) = delete;
  ConversationModel& operator=(const ConversationModel&) = delete;

  /// Orthogonal recurrent and bilinear weights, uniform embeddings.
  void initialize(std::uint64_t seed);

  [[nodiscard]] const EncoderConfig& config() const { return config_; }
  [[nodiscard]] const Vocab& vocab() const { return vocab_; }
  [[nodiscard]] ParamStore& params() { return params_; }
  [[nodiscard]] const ParamStore& params() const { return params_; }
  [[nodiscard]] const DialogEncoder& encoder() const { return encoder_; }
  [[nodiscard]] const BilinearScorer& scorer() const { return scorer_; }

 private:
  EncoderConfig config_;
  Vocab vocab_;
  ParamStore params_;
  DialogEncoder encoder_;
  BilinearScorer scorer_;
};

/// Everything a checkpoint carries besides the model itself.
struct CheckpointMeta {
  std::string fingerprint;
  ConsolidationState consolidation;
};

/// JSON container: format tag and version, fingerprint, encoder config,
/// vocabulary dump, every named parameter array (name, shape, values) and
/// the consolidation state. Doubles are written with round-trip precision.
void save_checkpoint(const std::filesystem::path& path, const ConversationModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::unique_ptr<ConversationModel> model;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace convcl
