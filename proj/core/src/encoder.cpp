#include "convcl/encoder.hpp"

#include <fstream>
#include <sstream>

#include "convcl/errors.hpp"

namespace convcl {

DialogEncoder::DialogEncoder(EncoderConfig config, const Vocab& vocab, ParamStore& store)
    : config_(config), vocab_(&vocab) {
  char_table_ = EmbeddingTable::create(store, "char_embedding", vocab.num_chars(), config_.char_dim);
  word_table_ = EmbeddingTable::create(store, "word_embedding", vocab.num_words(), config_.word_dim);
  char_fwd_ = LstmCell::create(store, "char_rnn.fwd", config_.char_dim, config_.char_hidden);
  char_bwd_ = LstmCell::create(store, "char_rnn.bwd", config_.char_dim, config_.char_hidden);
  word_fwd_ = LstmCell::create(store, "word_rnn.fwd", config_.word_vector_dim(), config_.utterance_hidden);
  word_bwd_ = LstmCell::create(store, "word_rnn.bwd", config_.word_vector_dim(), config_.utterance_hidden);
  state_cell_ = LstmCell::create(store, "state_rnn", config_.state_input_dim(), config_.state_hidden);
}

void DialogEncoder::initialize(ParamStore& store, Rng& rng) const {
  char_table_.initialize_uniform(store, rng, config_.embedding_init_bound);
  word_table_.initialize_uniform(store, rng, config_.embedding_init_bound);
  for (const LstmCell* cell : {&char_fwd_, &char_bwd_, &word_fwd_, &word_bwd_, &state_cell_}) {
    cell->initialize(store, rng);
  }
}

std::size_t load_pretrained_vectors(const std::filesystem::path& path, const DialogEncoder& encoder,
                                    ParamStore& store) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read pretrained vectors from " + path.string());
  const auto& table = encoder.word_table();
  auto weights = store.values(table.weight);
  std::size_t found = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    double v = 0.0;
    while (fields >> v) vec.push_back(v);
    if (vec.size() != table.dim) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.dim) + " values, got " + std::to_string(vec.size()));
    }
    const std::size_t index = encoder.vocab().word_index(token);
    if (Vocab::is_reserved_word(index)) continue;
    std::copy(vec.begin(), vec.end(), weights.begin() + static_cast<std::ptrdiff_t>(index * table.dim));
    ++found;
  }
  return found;
}

// ---------------------------------------------------------------------------

EncodeSession::EncodeSession(const DialogEncoder& encoder, Tape& tape, DropoutLayer* dropout)
    : encoder_(&encoder), tape_(&tape), dropout_(dropout) {}

Tensor EncodeSession::embed_word_index(std::size_t index, std::string_view spelling) {
  const DialogEncoder& enc = *encoder_;
  std::vector<Tensor> chars;
  if (Vocab::is_reserved_word(index) && index != Vocab::kUnknown) {
    // Reserved tokens have no surface spelling.
    chars.push_back(enc.char_table().lookup(*tape_, Vocab::kPadding));
  } else {
    chars.reserve(spelling.size());
    for (char c : spelling) {
      chars.push_back(enc.char_table().lookup(*tape_, enc.vocab().char_index(static_cast<unsigned char>(c))));
    }
  }
  auto [f, b] = run_bilstm(enc.char_forward(), enc.char_backward(), chars);
  const Tensor parts[] = {f, b, enc.word_table().lookup(*tape_, index)};
  return concat(parts);
}

Tensor EncodeSession::embed_word(std::string_view word) {
  if (auto it = word_cache_.find(std::string(word)); it != word_cache_.end()) return it->second;
  // Reserved tokens resolve to their fixed rows through the normal lookup.
  const std::size_t index = word.empty() ? Vocab::kPadding : encoder_->vocab().word_index(word);
  Tensor v = embed_word_index(index, word);
  word_cache_.emplace(std::string(word), v);
  return v;
}

Tensor EncodeSession::embed_utterance(std::string_view text) {
  const auto tokens = tokenize(text);
  return embed_tokens(tokens);
}

Tensor EncodeSession::embed_tokens(std::span<const std::string> tokens) {
  const std::size_t n = std::min(tokens.size(), encoder_->config().max_utterance_tokens);
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    key += tokens[i];
    key += '\x1f';
  }
  if (auto it = utterance_cache_.find(key); it != utterance_cache_.end()) return it->second;
  std::vector<Tensor> words;
  words.reserve(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < n; ++i) words.push_back(embed_word(tokens[i]));
  if (words.empty()) words.push_back(embed_word(Vocab::kPadToken));
  auto [f, b] = run_bilstm(encoder_->word_forward(), encoder_->word_backward(), words);
  Tensor u = concat(f, b);
  utterance_cache_.emplace(std::move(key), u);
  return u;
}

Tensor EncodeSession::start_action() {
  const std::string token(Vocab::kStartToken);
  return embed_tokens(std::span<const std::string>(&token, 1));
}

DialogState EncodeSession::initial_state() {
  auto zero = lstm_zero_state(*tape_, encoder_->state_cell());
  return {zero.h, zero.c, 0};
}

DialogState EncodeSession::advance_state(const DialogState& state, const Tensor& utterance,
                                         const Tensor& previous_action) {
  const std::size_t du = encoder_->config().utterance_dim();
  if (utterance.rank() != 1 || utterance.size() != du || previous_action.rank() != 1 ||
      previous_action.size() != du) {
    throw DimensionError("advance_state: expected utterance and action of dim " + std::to_string(du) +
                         ", got " + shape_to_string(utterance.shape()) + " and " +
                         shape_to_string(previous_action.shape()));
  }
  const Tensor input = concat(regularize(utterance), regularize(previous_action));
  auto next = lstm_step(encoder_->state_cell(), input, state.s, state.cell);
  return {next.h, next.c, state.turn + 1};
}

DialogState EncodeSession::encode_prefix(const Dialog& dialog, std::size_t upto_turn) {
  if (upto_turn < 1 || upto_turn > dialog.turns.size()) {
    throw IndexError("encode_prefix: turn " + std::to_string(upto_turn) + " outside dialog '" +
                     dialog.id + "' of length " + std::to_string(dialog.turns.size()));
  }
  DialogState state = initial_state();
  Tensor previous = start_action();
  for (std::size_t i = 0; i < upto_turn; ++i) {
    state = advance_state(state, embed_utterance(dialog.turns[i].user), previous);
    previous = embed_utterance(dialog.turns[i].system);
  }
  return state;
}

Tensor EncodeSession::regularize(const Tensor& x) {
  return dropout_ != nullptr ? dropout_->apply(x) : x;
}

}  // namespace convcl
