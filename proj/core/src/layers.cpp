#include "convcl/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "convcl/errors.hpp"

namespace convcl {

std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw DomainError("orthogonal_init needs positive dimensions");
  // Factor the tall orientation so Q has orthonormal columns, then transpose
  // back when the request is wide.
  const std::size_t tall = std::max(rows, cols);
  const std::size_t narrow = std::min(rows, cols);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(tall, narrow);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, narrow);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(narrow).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = rows >= cols ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                                       : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

std::vector<double> uniform_init(std::size_t dim, double bound, Rng& rng) {
  if (!(bound > 0.0)) throw DomainError("uniform_init needs a positive bound");
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> out(dim);
  for (double& v : out) v = dist(rng);
  return out;
}

// ---------------------------------------------------------------------------

LstmCell LstmCell::create(ParamStore& store, const std::string& name, std::size_t input_dim,
                          std::size_t hidden_dim) {
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.weight = store.add(name + ".weight", {4 * hidden_dim, input_dim + hidden_dim});
  cell.bias = store.add(name + ".bias", {4 * hidden_dim});
  return cell;
}

void LstmCell::initialize(ParamStore& store, Rng& rng) const {
  auto w = store.values(weight);
  const std::size_t width = input_dim + hidden_dim;
  for (std::size_t gate = 0; gate < 4; ++gate) {
    const auto input_block = orthogonal_init(hidden_dim, input_dim, rng);
    const auto recurrent_block = orthogonal_init(hidden_dim, hidden_dim, rng);
    for (std::size_t r = 0; r < hidden_dim; ++r) {
      double* row = &w[(gate * hidden_dim + r) * width];
      std::copy_n(&input_block[r * input_dim], input_dim, row);
      std::copy_n(&recurrent_block[r * hidden_dim], hidden_dim, row + input_dim);
    }
  }
  auto b = store.values(bias);
  std::fill(b.begin(), b.end(), 0.0);
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden_dim),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden_dim), 1.0);
}

LstmState lstm_step(const LstmCell& cell, const Tensor& x, const Tensor& h, const Tensor& c) {
  if (x.rank() != 1 || x.size() != cell.input_dim || h.rank() != 1 || h.size() != cell.hidden_dim ||
      c.rank() != 1 || c.size() != cell.hidden_dim) {
    throw DimensionError("lstm_step: cell expects x[" + std::to_string(cell.input_dim) + "], h/c[" +
                         std::to_string(cell.hidden_dim) + "], got x" + shape_to_string(x.shape()) +
                         " h" + shape_to_string(h.shape()) + " c" + shape_to_string(c.shape()));
  }
  Tape& tape = x.tape();
  const std::size_t hd = cell.hidden_dim;
  const Tensor z = add(matmul(tape.param(cell.weight), concat(x, h)), tape.param(cell.bias));
  const Tensor hc = lstm_gates(z, c);
  return {slice(hc, 0, hd), slice(hc, hd, hd)};
}

LstmState lstm_zero_state(Tape& tape, const LstmCell& cell) {
  const Tensor zero = tape.constant(std::vector<double>(cell.hidden_dim, 0.0), {cell.hidden_dim});
  return {zero, zero};
}

std::pair<Tensor, Tensor> run_bilstm(const LstmCell& fwd, const LstmCell& bwd,
                                     std::span<const Tensor> inputs) {
  if (inputs.empty()) throw DomainError("run_bilstm on an empty sequence");
  Tape& tape = inputs.front().tape();
  LstmState f = lstm_zero_state(tape, fwd);
  for (const Tensor& x : inputs) f = lstm_step(fwd, x, f.h, f.c);
  LstmState b = lstm_zero_state(tape, bwd);
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) b = lstm_step(bwd, *it, b.h, b.c);
  return {f.h, b.h};
}

// ---------------------------------------------------------------------------

EmbeddingTable EmbeddingTable::create(ParamStore& store, const std::string& name,
                                      std::size_t vocab_size, std::size_t dim) {
  if (vocab_size < 2) throw ConfigError("embedding table '" + name + "' needs padding and unknown rows");
  EmbeddingTable table;
  table.vocab_size = vocab_size;
  table.dim = dim;
  table.weight = store.add(name, {vocab_size, dim});
  return table;
}

void EmbeddingTable::initialize_uniform(ParamStore& store, Rng& rng, double bound) const {
  auto w = store.values(weight);
  const auto draws = uniform_init(w.size(), bound, rng);
  std::copy(draws.begin(), draws.end(), w.begin());
  std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(kPadding * dim), dim, 0.0);
}

Tensor EmbeddingTable::lookup(Tape& tape, std::size_t index) const {
  if (index >= vocab_size) index = kUnknown;
  return tape.param_row(weight, index, index == kPadding);
}

// ---------------------------------------------------------------------------

DropoutLayer::DropoutLayer(double ratio, std::uint64_t seed) : ratio_(ratio), rng_(seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("dropout ratio must lie in [0, 1)");
}

Tensor DropoutLayer::apply(const Tensor& x) {
  if (!training_ || ratio_ == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - ratio_);
  const double survivor_scale = 1.0 / (1.0 - ratio_);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = keep(rng_) ? survivor_scale : 0.0;
  return mul(x, x.tape().constant(std::move(mask), x.shape()));
}

}  // namespace convcl
