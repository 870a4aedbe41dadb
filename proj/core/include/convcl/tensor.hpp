#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "convcl/param_store.hpp"

namespace convcl {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape that produced it is alive. Rank 0 is a scalar, rank 1 a vector,
/// rank 2 a row-major matrix.
class Tensor {
 public:
  Tensor() = default;

  [[nodiscard]] bool valid() const { return tape_ != nullptr; }
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::uint32_t id() const { return id_; }

  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t rank() const { return shape().size(); }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::span<const double> values() const;
  /// Empty until backward has run on a loss that depends on this tensor.
  [[nodiscard]] std::span<const double> grad() const;
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] double item() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  Leaf,
  Param,
  ParamRow,
  MatMul,
  Concat,
  Slice,
  Add,
  Sub,
  Mul,
  Scale,
  Sigmoid,
  Tanh,
  Log,
  Exp,
  Softmax,
  LogSumExp,
  Sum,
  Pick,
  LstmGates,
};

/// Append-only record of a define-by-run computation. A fresh tape is built
/// for every forward pass. Parameters bound from a ParamStore receive their
/// gradient (additively) when backward runs.
class Tape {
 public:
  Tape() = default;
  explicit Tape(ParamStore& store) : store_(&store) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradient.
  Tensor constant(std::vector<double> values, Shape shape);
  Tensor scalar(double value) { return constant({value}, {}); }
  /// Leaf that receives gradient but is not backed by a ParamStore.
  Tensor variable(std::vector<double> values, Shape shape);

  /// Binds a whole parameter array; repeated calls return the same node.
  Tensor param(ParamId id);
  /// Binds one row of a rank-2 parameter. A frozen row reads its values but
  /// never writes gradient back to the store.
  Tensor param_row(ParamId id, std::size_t row, bool frozen = false);

  /// Computes d(loss)/d(node) for every node recorded before `loss`, then
  /// adds parameter gradients into the bound store. Node gradients are
  /// recomputed from scratch on every call.
  void backward(const Tensor& loss);

  [[nodiscard]] std::size_t num_nodes() const { return nodes_.size(); }
  [[nodiscard]] ParamStore* store() const { return store_; }

 private:
  friend class Tensor;
  friend struct TapeAccess;

  struct Node {
    OpKind op = OpKind::Leaf;
    Shape shape;
    bool requires_grad = false;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::uint32_t> inputs;
    double scalar = 0.0;    // Scale factor
    std::size_t index = 0;  // Slice offset, Pick index, ParamRow row
    std::size_t m = 0, k = 0, n = 0;  // MatMul dims
    ParamId param{};
    bool frozen = false;
    std::vector<double> aux;  // LstmGates activations
  };

  Tensor push(Node node);
  const Node& node(std::uint32_t id) const { return nodes_[id]; }
  void propagate(std::uint32_t id);

  ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::int64_t> param_nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> row_nodes_;
};

// Differentiable primitives. Every operand must live on the same tape.

/// Matrix product with vector promotion: a rank-1 left operand is a row,
/// a rank-1 right operand is a column, and promoted dimensions are dropped
/// from the result (so vector x vector is a dot product).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor concat(std::span<const Tensor> parts);
/// Packs scalars into a vector.
Tensor stack(std::span<const Tensor> scalars);
Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor negate(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softmax(const Tensor& x);
/// Numerically stable log(sum(exp(x))) over a vector.
Tensor logsumexp(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor pick(const Tensor& x, std::size_t index);

/// Fused LSTM cell update. `z` holds the 4h gate pre-activations in i, f, o, g
/// order and `c` the previous cell state; the result is [h_next, c_next].
Tensor lstm_gates(const Tensor& z, const Tensor& c);

/// Convenience: sum(a * a).
Tensor squared_norm(const Tensor& x);

}  // namespace convcl
