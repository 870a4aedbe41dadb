#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convcl/dialog.hpp"
#include "convcl/layers.hpp"
#include "convcl/param_store.hpp"
#include "convcl/tensor.hpp"
#include "convcl/vocab.hpp"

namespace convcl {

struct EncoderConfig {
  std::size_t char_dim = 8;
  std::size_t word_dim = 100;
  std::size_t char_hidden = 25;       // per direction
  std::size_t utterance_hidden = 128;  // per direction
  std::size_t state_hidden = 256;
  std::size_t max_utterance_tokens = 20;
  double embedding_init_bound = 0.01;

  [[nodiscard]] std::size_t word_vector_dim() const { return 2 * char_hidden + word_dim; }
  [[nodiscard]] std::size_t utterance_dim() const { return 2 * utterance_hidden; }
  [[nodiscard]] std::size_t state_input_dim() const { return 2 * utterance_dim(); }

  static EncoderConfig paper() { return {}; }
  /// Small dimensions for tests and quick experiments.
  static EncoderConfig desk() { return {8, 32, 8, 32, 64, 20, 0.01}; }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct DialogState {
  Tensor s;
  Tensor cell;
  std::size_t turn = 0;
};

/// Characters -> word vector, words -> utterance vector, and
/// (utterance, previous action) pairs -> dialog state. User utterances and
/// system actions share the character and word encoders.
class DialogEncoder {
 public:
  DialogEncoder(EncoderConfig config, const Vocab& vocab, ParamStore& store);

  void initialize(ParamStore& store, Rng& rng) const;

  [[nodiscard]] const EncoderConfig& config() const { return config_; }
  [[nodiscard]] const Vocab& vocab() const { return *vocab_; }
  [[nodiscard]] const EmbeddingTable& char_table() const { return char_table_; }
  [[nodiscard]] const EmbeddingTable& word_table() const { return word_table_; }
  [[nodiscard]] const LstmCell& char_forward() const { return char_fwd_; }
  [[nodiscard]] const LstmCell& char_backward() const { return char_bwd_; }
  [[nodiscard]] const LstmCell& word_forward() const { return word_fwd_; }
  [[nodiscard]] const LstmCell& word_backward() const { return word_bwd_; }
  [[nodiscard]] const LstmCell& state_cell() const { return state_cell_; }

 private:
  EncoderConfig config_;
  const Vocab* vocab_;
  EmbeddingTable char_table_;
  EmbeddingTable word_table_;
  LstmCell char_fwd_, char_bwd_;
  LstmCell word_fwd_, word_bwd_;
  LstmCell state_cell_;
};

/// Loads whitespace-separated "token v1 ... vD" lines into matching rows of
/// the word table. Returns the number of vocabulary words that were found.
std::size_t load_pretrained_vectors(const std::filesystem::path& path, const DialogEncoder& encoder,
                                    ParamStore& store);

/// One forward pass worth of encoding on a single tape. Word and utterance
/// vectors are memoized per session; dropout (when given) is applied to
/// utterance embeddings entering the state RNN and by `regularize`.
class EncodeSession {
 public:
  EncodeSession(const DialogEncoder& encoder, Tape& tape, DropoutLayer* dropout = nullptr);

  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] const DialogEncoder& encoder() const { return *encoder_; }

  Tensor embed_word(std::string_view word);
  /// Tokenizes and truncates; an empty utterance becomes one padding token.
  Tensor embed_utterance(std::string_view text);
  Tensor embed_tokens(std::span<const std::string> tokens);
  /// Embedding of the reserved start-of-dialog action.
  Tensor start_action();

  DialogState initial_state();
  DialogState advance_state(const DialogState& state, const Tensor& utterance,
                            const Tensor& previous_action);
  /// State used to choose the system action of turn `upto_turn` (1-based):
  /// turn i consumes user utterance i and system action i - 1.
  DialogState encode_prefix(const Dialog& dialog, std::size_t upto_turn);

  Tensor regularize(const Tensor& x);

 private:
  Tensor embed_word_index(std::size_t index, std::string_view spelling);

  const DialogEncoder* encoder_;
  Tape* tape_;
  DropoutLayer* dropout_;
  std::unordered_map<std::string, Tensor> word_cache_;
  std::unordered_map<std::string, Tensor> utterance_cache_;
};

}  // namespace convcl
