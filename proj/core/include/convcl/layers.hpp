#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convcl/param_store.hpp"
#include "convcl/tensor.hpp"

namespace convcl {

using Rng = std::mt19937_64;

/// Returns a rows x cols row-major matrix with orthonormal rows or columns
/// (whichever dimension is smaller), from the QR factorization of a Gaussian
/// matrix with the sign of R's diagonal folded into Q.
std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng);

/// I.i.d. draws from U(-bound, bound).
std::vector<double> uniform_init(std::size_t dim, double bound, Rng& rng);

/// LSTM with one weight matrix per gate over the concatenated [x; h].
/// Gate rows are stacked in the order input, forget, output, candidate, so
/// `weight` is (4 * hidden) x (input + hidden) and `bias` has 4 * hidden
/// entries.
struct LstmCell {
  ParamId weight;
  ParamId bias;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static LstmCell create(ParamStore& store, const std::string& name, std::size_t input_dim,
                         std::size_t hidden_dim);

  /// Orthogonal blocks for the input and recurrent halves of every gate,
  /// zero biases except the forget gate, which starts at 1.
  void initialize(ParamStore& store, Rng& rng) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_step(const LstmCell& cell, const Tensor& x, const Tensor& h, const Tensor& c);

/// Zero-initialized state on `tape` sized for `cell`.
LstmState lstm_zero_state(Tape& tape, const LstmCell& cell);

/// Runs `fwd` left-to-right and `bwd` right-to-left from zero states and
/// returns (last forward hidden state, first backward hidden state).
std::pair<Tensor, Tensor> run_bilstm(const LstmCell& fwd, const LstmCell& bwd,
                                     std::span<const Tensor> inputs);

/// Lookup table with reserved rows: 0 is padding (frozen at zero), 1 is the
/// unknown token. Indices past the table map to the unknown row.
struct EmbeddingTable {
  static constexpr std::size_t kPadding = 0;
  static constexpr std::size_t kUnknown = 1;

  ParamId weight;
  std::size_t vocab_size = 0;
  std::size_t dim = 0;

  static EmbeddingTable create(ParamStore& store, const std::string& name, std::size_t vocab_size,
                               std::size_t dim);

  void initialize_uniform(ParamStore& store, Rng& rng, double bound) const;
  Tensor lookup(Tape& tape, std::size_t index) const;
};

/// Inverted dropout: in training mode each unit is zeroed with probability
/// p and survivors are scaled by 1 / (1 - p). Eval mode is the identity.
class DropoutLayer {
 public:
  DropoutLayer(double ratio, std::uint64_t seed);

  void train() { training_ = true; }
  void eval() { training_ = false; }
  [[nodiscard]] bool training() const { return training_; }
  [[nodiscard]] double ratio() const { return ratio_; }

  Tensor apply(const Tensor& x);

 private:
  double ratio_;
  bool training_ = false;
  Rng rng_;
};

}  // namespace convcl
