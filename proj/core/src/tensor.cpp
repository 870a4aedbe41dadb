#include "convcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "convcl/errors.hpp"

namespace convcl {

namespace {
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMajor>;
}  // namespace

// Gives the free-function ops access to node recording.
struct TapeAccess {
  using Node = Tape::Node;

  static Tensor push(Tape& tape, Node node) { return tape.push(std::move(node)); }
  static const Node& node(const Tensor& t) { return t.tape().node(t.id()); }
};

namespace {

using Node = TapeAccess::Node;

const Node& node_of(const Tensor& t) {
  if (!t.valid()) throw ContractError("operation on an unbound tensor");
  return TapeAccess::node(t);
}

Tape& common_tape(const Tensor& a, const Tensor& b) {
  node_of(a);
  node_of(b);
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

Node unary_node(OpKind op, const Tensor& x) {
  const Node& in = node_of(x);
  Node out;
  out.op = op;
  out.shape = in.shape;
  out.requires_grad = in.requires_grad;
  out.inputs = {x.id()};
  out.value.resize(in.value.size());
  return out;
}

Node binary_node(OpKind op, const Tensor& a, const Tensor& b, const char* name) {
  common_tape(a, b);
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  if (na.shape != nb.shape) {
    throw DimensionError(std::string(name) + ": shape mismatch " + shape_to_string(na.shape) +
                         " vs " + shape_to_string(nb.shape));
  }
  Node out;
  out.op = op;
  out.shape = na.shape;
  out.requires_grad = na.requires_grad || nb.requires_grad;
  out.inputs = {a.id(), b.id()};
  out.value.resize(na.value.size());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

const Shape& Tensor::shape() const { return node_of(*this).shape; }
std::size_t Tensor::size() const { return node_of(*this).value.size(); }
std::span<const double> Tensor::values() const { return node_of(*this).value; }
std::span<const double> Tensor::grad() const { return node_of(*this).grad; }
bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }

double Tensor::item() const {
  const Node& n = node_of(*this);
  if (n.value.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_to_string(n.shape));
  }
  return n.value[0];
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Tape::constant(std::vector<double> values, Shape shape) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("constant: " + std::to_string(values.size()) +
                         " values for shape " + shape_to_string(shape));
  }
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  return push(std::move(n));
}

Tensor Tape::variable(std::vector<double> values, Shape shape) {
  Tensor t = constant(std::move(values), std::move(shape));
  nodes_[t.id()].requires_grad = true;
  return t;
}

Tensor Tape::param(ParamId id) {
  if (store_ == nullptr) throw ContractError("tape has no parameter store");
  const ParamInfo& info = store_->info(id);
  if (param_nodes_.size() < store_->num_params()) param_nodes_.resize(store_->num_params(), -1);
  if (param_nodes_[id.index] >= 0) {
    return Tensor(this, static_cast<std::uint32_t>(param_nodes_[id.index]));
  }
  Node n;
  n.op = OpKind::Param;
  n.shape = info.shape;
  n.requires_grad = true;
  n.param = id;
  auto vals = store_->values(id);
  n.value.assign(vals.begin(), vals.end());
  Tensor t = push(std::move(n));
  param_nodes_[id.index] = t.id();
  return t;
}

Tensor Tape::param_row(ParamId id, std::size_t row, bool frozen) {
  if (store_ == nullptr) throw ContractError("tape has no parameter store");
  const ParamInfo& info = store_->info(id);
  if (info.shape.size() != 2) throw DimensionError("param_row on non-matrix '" + info.name + "'");
  if (row >= info.shape[0]) {
    throw IndexError("row " + std::to_string(row) + " out of range for '" + info.name + "' " +
                     shape_to_string(info.shape));
  }
  const std::uint64_t key = (static_cast<std::uint64_t>(id.index) << 32) | row;
  if (auto it = row_nodes_.find(key); it != row_nodes_.end()) return Tensor(this, it->second);
  const std::size_t cols = info.shape[1];
  Node n;
  n.op = OpKind::ParamRow;
  n.shape = {cols};
  n.requires_grad = !frozen;
  n.frozen = frozen;
  n.param = id;
  n.index = row;
  auto vals = store_->values(id).subspan(row * cols, cols);
  n.value.assign(vals.begin(), vals.end());
  Tensor t = push(std::move(n));
  row_nodes_.emplace(key, t.id());
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.valid() || &loss.tape() != this) throw ContractError("loss not recorded on this tape");
  const Node& ln = nodes_[loss.id()];
  if (ln.value.size() != 1) {
    throw DimensionError("backward needs a scalar loss, got rank " +
                         std::to_string(ln.shape.size()) + " shape " + shape_to_string(ln.shape));
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) {
      n.grad.assign(n.value.size(), 0.0);
    } else {
      n.grad.clear();
    }
  }
  if (!ln.requires_grad) return;
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    const auto id = static_cast<std::uint32_t>(i);
    if (nodes_[id].requires_grad) propagate(id);
  }
  if (store_ == nullptr) return;
  for (std::uint32_t i = 0; i <= loss.id(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == OpKind::Param) {
      auto g = store_->grads(n.param);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
    } else if (n.op == OpKind::ParamRow && !n.frozen) {
      const std::size_t cols = n.value.size();
      auto g = store_->grads(n.param).subspan(n.index * cols, cols);
      for (std::size_t j = 0; j < cols; ++j) g[j] += n.grad[j];
    }
  }
}

void Tape::propagate(std::uint32_t id) {
  Node& n = nodes_[id];
  const std::vector<double>& g = n.grad;
  auto input_grad = [&](std::size_t which) -> std::vector<double>* {
    Node& in = nodes_[n.inputs[which]];
    return in.requires_grad ? &in.grad : nullptr;
  };
  switch (n.op) {
    case OpKind::Leaf:
    case OpKind::Param:
    case OpKind::ParamRow:
      return;
    case OpKind::MatMul: {
      const auto& a = nodes_[n.inputs[0]].value;
      const auto& b = nodes_[n.inputs[1]].value;
      if (auto* ga = input_grad(0)) {
        ConstMatrixMap gc(g.data(), n.m, n.n);
        MatrixMap(ga->data(), n.m, n.k).noalias() += gc * ConstMatrixMap(b.data(), n.k, n.n).transpose();
      }
      if (auto* gb = input_grad(1)) {
        ConstMatrixMap gc(g.data(), n.m, n.n);
        MatrixMap(gb->data(), n.k, n.n).noalias() += ConstMatrixMap(a.data(), n.m, n.k).transpose() * gc;
      }
      return;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t w = 0; w < n.inputs.size(); ++w) {
        const std::size_t len = nodes_[n.inputs[w]].value.size();
        if (auto* gi = input_grad(w)) {
          for (std::size_t j = 0; j < len; ++j) (*gi)[j] += g[offset + j];
        }
        offset += len;
      }
      return;
    }
    case OpKind::Slice:
      if (auto* gi = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*gi)[n.index + j] += g[j];
      }
      return;
    case OpKind::Add:
    case OpKind::Sub: {
      const double sign = n.op == OpKind::Add ? 1.0 : -1.0;
      if (auto* ga = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*ga)[j] += g[j];
      }
      if (auto* gb = input_grad(1)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*gb)[j] += sign * g[j];
      }
      return;
    }
    case OpKind::Mul: {
      const auto& a = nodes_[n.inputs[0]].value;
      const auto& b = nodes_[n.inputs[1]].value;
      if (auto* ga = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*ga)[j] += g[j] * b[j];
      }
      if (auto* gb = input_grad(1)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*gb)[j] += g[j] * a[j];
      }
      return;
    }
    case OpKind::Scale:
      if (auto* gi = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*gi)[j] += n.scalar * g[j];
      }
      return;
    case OpKind::Sigmoid:
      if (auto* gi = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double y = n.value[j];
          (*gi)[j] += g[j] * y * (1.0 - y);
        }
      }
      return;
    case OpKind::Tanh:
      if (auto* gi = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double y = n.value[j];
          (*gi)[j] += g[j] * (1.0 - y * y);
        }
      }
      return;
    case OpKind::Log:
      if (auto* gi = input_grad(0)) {
        const auto& x = nodes_[n.inputs[0]].value;
        for (std::size_t j = 0; j < g.size(); ++j) (*gi)[j] += g[j] / x[j];
      }
      return;
    case OpKind::Exp:
      if (auto* gi = input_grad(0)) {
        for (std::size_t j = 0; j < g.size(); ++j) (*gi)[j] += g[j] * n.value[j];
      }
      return;
    case OpKind::Softmax:
      if (auto* gi = input_grad(0)) {
        double dot = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * n.value[j];
        for (std::size_t j = 0; j < g.size(); ++j) (*gi)[j] += n.value[j] * (g[j] - dot);
      }
      return;
    case OpKind::LogSumExp:
      if (auto* gi = input_grad(0)) {
        const auto& x = nodes_[n.inputs[0]].value;
        for (std::size_t j = 0; j < x.size(); ++j) (*gi)[j] += g[0] * std::exp(x[j] - n.value[0]);
      }
      return;
    case OpKind::Sum:
      if (auto* gi = input_grad(0)) {
        for (double& v : *gi) v += g[0];
      }
      return;
    case OpKind::Pick:
      if (auto* gi = input_grad(0)) (*gi)[n.index] += g[0];
      return;
    case OpKind::LstmGates: {
      const std::size_t h = n.index;
      const auto& act = n.aux;  // i f o g tanh(c_next)
      const auto& c = nodes_[n.inputs[1]].value;
      auto* gz = input_grad(0);
      auto* gc = input_grad(1);
      for (std::size_t j = 0; j < h; ++j) {
        const double i = act[j], f = act[h + j], o = act[2 * h + j], cand = act[3 * h + j];
        const double tc = act[4 * h + j];
        const double gh = g[j];
        const double dc = g[h + j] + gh * o * (1.0 - tc * tc);
        if (gz != nullptr) {
          (*gz)[j] += dc * cand * i * (1.0 - i);
          (*gz)[h + j] += dc * c[j] * f * (1.0 - f);
          (*gz)[2 * h + j] += gh * tc * o * (1.0 - o);
          (*gz)[3 * h + j] += dc * i * (1.0 - cand * cand);
        }
        if (gc != nullptr) (*gc)[j] += dc * f;
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = common_tape(a, b);
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  if (na.shape.empty() || na.shape.size() > 2 || nb.shape.empty() || nb.shape.size() > 2) {
    throw DimensionError("matmul: operands must be vectors or matrices, got " +
                         shape_to_string(na.shape) + " and " + shape_to_string(nb.shape));
  }
  const bool a_vec = na.shape.size() == 1;
  const bool b_vec = nb.shape.size() == 1;
  const std::size_t m = a_vec ? 1 : na.shape[0];
  const std::size_t k = a_vec ? na.shape[0] : na.shape[1];
  const std::size_t kb = nb.shape[0];
  const std::size_t n = b_vec ? 1 : nb.shape[1];
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(na.shape) +
                         " x " + shape_to_string(nb.shape));
  }
  Node out;
  out.op = OpKind::MatMul;
  out.m = m;
  out.k = k;
  out.n = n;
  if (!a_vec) out.shape.push_back(m);
  if (!b_vec) out.shape.push_back(n);
  out.requires_grad = na.requires_grad || nb.requires_grad;
  out.inputs = {a.id(), b.id()};
  out.value.assign(m * n, 0.0);
  MatrixMap(out.value.data(), m, n).noalias() = ConstMatrixMap(na.value.data(), m, k) * ConstMatrixMap(nb.value.data(), k, n);
  return TapeAccess::push(tape, std::move(out));
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(parts);
}

namespace {

Tensor concat_impl(std::span<const Tensor> parts, bool scalars) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Tape& tape = parts.front().tape();
  Node out;
  out.op = OpKind::Concat;
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    const Node& n = node_of(t);
    if (&t.tape() != &tape) throw ContractError("operands recorded on different tapes");
    if (scalars ? n.value.size() != 1 : n.shape.size() != 1) {
      throw DimensionError(std::string(scalars ? "stack expects scalars" : "concat expects vectors") +
                           ", got rank " + std::to_string(n.shape.size()) + " shape " +
                           shape_to_string(n.shape));
    }
    total += n.value.size();
    out.requires_grad = out.requires_grad || n.requires_grad;
    out.inputs.push_back(t.id());
  }
  out.shape = {total};
  out.value.reserve(total);
  for (const Tensor& t : parts) {
    const auto& v = node_of(t).value;
    out.value.insert(out.value.end(), v.begin(), v.end());
  }
  return TapeAccess::push(tape, std::move(out));
}

}  // namespace

Tensor concat(std::span<const Tensor> parts) { return concat_impl(parts, false); }

Tensor stack(std::span<const Tensor> scalars) { return concat_impl(scalars, true); }

Tensor slice(const Tensor& x, std::size_t offset, std::size_t length) {
  const Node& in = node_of(x);
  if (in.shape.size() != 1) throw DimensionError("slice expects a vector, got " + shape_to_string(in.shape));
  if (offset + length > in.value.size()) {
    throw IndexError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for length " + std::to_string(in.value.size()));
  }
  Node out;
  out.op = OpKind::Slice;
  out.shape = {length};
  out.requires_grad = in.requires_grad;
  out.inputs = {x.id()};
  out.index = offset;
  out.value.assign(in.value.begin() + static_cast<std::ptrdiff_t>(offset),
                   in.value.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  Node out = binary_node(OpKind::Add, a, b, "add");
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  for (std::size_t j = 0; j < out.value.size(); ++j) out.value[j] = av[j] + bv[j];
  return TapeAccess::push(a.tape(), std::move(out));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Node out = binary_node(OpKind::Sub, a, b, "sub");
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  for (std::size_t j = 0; j < out.value.size(); ++j) out.value[j] = av[j] - bv[j];
  return TapeAccess::push(a.tape(), std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Node out = binary_node(OpKind::Mul, a, b, "mul");
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  for (std::size_t j = 0; j < out.value.size(); ++j) out.value[j] = av[j] * bv[j];
  return TapeAccess::push(a.tape(), std::move(out));
}

Tensor scale(const Tensor& x, double factor) {
  Node out = unary_node(OpKind::Scale, x);
  out.scalar = factor;
  const auto& v = node_of(x).value;
  for (std::size_t j = 0; j < v.size(); ++j) out.value[j] = factor * v[j];
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor negate(const Tensor& x) { return scale(x, -1.0); }

Tensor sigmoid(const Tensor& x) {
  Node out = unary_node(OpKind::Sigmoid, x);
  const auto& v = node_of(x).value;
  for (std::size_t j = 0; j < v.size(); ++j) {
    // Branch keeps exp() from overflowing for large |x|.
    out.value[j] = v[j] >= 0.0 ? 1.0 / (1.0 + std::exp(-v[j]))
                               : std::exp(v[j]) / (1.0 + std::exp(v[j]));
  }
  return TapeAccess::push(x.tape(), std::move(out));
}

namespace {
double logistic(double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }
}  // namespace

Tensor lstm_gates(const Tensor& z, const Tensor& c) {
  Tape& tape = common_tape(z, c);
  const Node& nz = node_of(z);
  const Node& nc = node_of(c);
  if (nc.shape.size() != 1 || nz.shape.size() != 1 || nz.value.size() != 4 * nc.value.size()) {
    throw DimensionError("lstm_gates: expected z[4h] and c[h], got z" + shape_to_string(nz.shape) + " c" +
                         shape_to_string(nc.shape));
  }
  const std::size_t h = nc.value.size();
  Node out;
  out.op = OpKind::LstmGates;
  out.shape = {2 * h};
  out.requires_grad = nz.requires_grad || nc.requires_grad;
  out.inputs = {z.id(), c.id()};
  out.index = h;
  out.value.resize(2 * h);
  out.aux.resize(5 * h);
  for (std::size_t j = 0; j < h; ++j) {
    const double i = logistic(nz.value[j]);
    const double f = logistic(nz.value[h + j]);
    const double o = logistic(nz.value[2 * h + j]);
    const double cand = std::tanh(nz.value[3 * h + j]);
    const double c_next = f * nc.value[j] + i * cand;
    const double tc = std::tanh(c_next);
    out.aux[j] = i;
    out.aux[h + j] = f;
    out.aux[2 * h + j] = o;
    out.aux[3 * h + j] = cand;
    out.aux[4 * h + j] = tc;
    out.value[j] = o * tc;
    out.value[h + j] = c_next;
  }
  return TapeAccess::push(tape, std::move(out));
}

Tensor tanh(const Tensor& x) {
  Node out = unary_node(OpKind::Tanh, x);
  const auto& v = node_of(x).value;
  for (std::size_t j = 0; j < v.size(); ++j) out.value[j] = std::tanh(v[j]);
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor log(const Tensor& x) {
  Node out = unary_node(OpKind::Log, x);
  const auto& v = node_of(x).value;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (!(v[j] > 0.0)) {
      throw DomainError("log of non-positive value " + std::to_string(v[j]) + " at index " +
                        std::to_string(j));
    }
    out.value[j] = std::log(v[j]);
  }
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor exp(const Tensor& x) {
  Node out = unary_node(OpKind::Exp, x);
  const auto& v = node_of(x).value;
  for (std::size_t j = 0; j < v.size(); ++j) out.value[j] = std::exp(v[j]);
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor softmax(const Tensor& x) {
  Node out = unary_node(OpKind::Softmax, x);
  const auto& v = node_of(x).value;
  if (out.shape.size() != 1) throw DimensionError("softmax expects a vector, got " + shape_to_string(out.shape));
  if (v.empty()) throw DomainError("softmax of empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    out.value[j] = std::exp(v[j] - mx);
    total += out.value[j];
  }
  for (double& y : out.value) y /= total;
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor logsumexp(const Tensor& x) {
  const Node& in = node_of(x);
  if (in.shape.size() != 1) throw DimensionError("logsumexp expects a vector, got " + shape_to_string(in.shape));
  if (in.value.empty()) throw DomainError("logsumexp of empty vector");
  const double mx = *std::max_element(in.value.begin(), in.value.end());
  double total = 0.0;
  for (double v : in.value) total += std::exp(v - mx);
  Node out;
  out.op = OpKind::LogSumExp;
  out.requires_grad = in.requires_grad;
  out.inputs = {x.id()};
  out.value = {mx + std::log(total)};
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor sum(const Tensor& x) {
  const Node& in = node_of(x);
  Node out;
  out.op = OpKind::Sum;
  out.requires_grad = in.requires_grad;
  out.inputs = {x.id()};
  double total = 0.0;
  for (double v : in.value) total += v;
  out.value = {total};
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor pick(const Tensor& x, std::size_t index) {
  const Node& in = node_of(x);
  if (in.shape.size() != 1) throw DimensionError("pick expects a vector, got " + shape_to_string(in.shape));
  if (index >= in.value.size()) {
    throw IndexError("pick index " + std::to_string(index) + " out of range for length " +
                     std::to_string(in.value.size()));
  }
  Node out;
  out.op = OpKind::Pick;
  out.requires_grad = in.requires_grad;
  out.inputs = {x.id()};
  out.index = index;
  out.value = {in.value[index]};
  return TapeAccess::push(x.tape(), std::move(out));
}

Tensor squared_norm(const Tensor& x) { return sum(mul(x, x)); }

}  // namespace convcl
