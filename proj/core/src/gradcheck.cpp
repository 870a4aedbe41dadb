#include "convcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "convcl/consolidation.hpp"
#include "convcl/errors.hpp"
#include "convcl/layers.hpp"
#include "convcl/model.hpp"
#include "convcl/ranker.hpp"

namespace convcl {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double leaf_gradient_error(const std::vector<std::vector<double>>& inputs, const std::vector<Shape>& shapes,
                           const LeafLoss& loss, double step) {
  if (inputs.size() != shapes.size()) throw AlignmentError("leaf_gradient_error: inputs and shapes differ");
  auto evaluate = [&](const std::vector<std::vector<double>>& values, std::vector<std::vector<double>>* grads) {
    Tape tape;
    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < values.size(); ++i) leaves.push_back(tape.variable(values[i], shapes[i]));
    const Tensor out = loss(tape, leaves);
    if (grads != nullptr) {
      tape.backward(out);
      grads->clear();
      for (const auto& leaf : leaves) grads->emplace_back(leaf.grad().begin(), leaf.grad().end());
    }
    return out.item();
  };
  std::vector<std::vector<double>> analytic;
  evaluate(inputs, &analytic);
  double worst = 0.0;
  auto work = inputs;
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (std::size_t k = 0; k < work[i].size(); ++k) {
      const double orig = work[i][k];
      work[i][k] = orig + step;
      const double up = evaluate(work, nullptr);
      work[i][k] = orig - step;
      const double down = evaluate(work, nullptr);
      work[i][k] = orig;
      worst = std::max(worst, relative_error(analytic[i][k], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

double param_gradient_error(ParamStore& store, const std::function<Tensor(Tape&)>& loss,
                            std::span<const std::size_t> flat_indices, double step) {
  store.zero_grad();
  {
    Tape tape(store);
    tape.backward(loss(tape));
  }
  const std::vector<double> analytic(store.flat_grads().begin(), store.flat_grads().end());
  store.zero_grad();
  auto evaluate = [&] {
    Tape tape(store);
    return loss(tape).item();
  };
  double worst = 0.0;
  auto values = store.flat_values();
  for (std::size_t k : flat_indices) {
    if (k >= values.size()) throw IndexError("param_gradient_error: flat index out of range");
    const double orig = values[k];
    values[k] = orig + step;
    const double up = evaluate();
    values[k] = orig - step;
    const double down = evaluate();
    values[k] = orig;
    worst = std::max(worst, relative_error(analytic[k], (up - down) / (2.0 * step)));
  }
  return worst;
}

namespace {

std::vector<double> normal_values(std::size_t n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<double> uniform_values(std::size_t n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Contracts `y` against fixed random weights so every output entry matters.
Tensor weighted_sum(Tape& tape, const Tensor& y, Rng& rng) {
  return sum(mul(y, tape.constant(normal_values(y.size(), rng), y.shape())));
}

struct LeafCase {
  std::vector<std::vector<double>> inputs;
  std::vector<Shape> shapes;
  std::function<Tensor(Tape&, std::span<const Tensor>)> op;
};

using CaseMaker = std::function<LeafCase(Rng&)>;

LeafCase unary(Rng& rng, std::function<Tensor(const Tensor&)> f, double lo = -2.0, double hi = 2.0) {
  const std::size_t n = dim(rng, 1, 6);
  return {{uniform_values(n, lo, hi, rng)}, {{n}}, [f](Tape&, std::span<const Tensor> x) { return f(x[0]); }};
}

LeafCase binary(Rng& rng, std::function<Tensor(const Tensor&, const Tensor&)> f) {
  const Shape shape = {dim(rng), dim(rng)};
  const std::size_t n = shape_size(shape);
  return {{normal_values(n, rng), normal_values(n, rng)},
          {shape, shape},
          [f](Tape&, std::span<const Tensor> x) { return f(x[0], x[1]); }};
}

std::vector<std::pair<std::string, CaseMaker>> leaf_cases() {
  std::vector<std::pair<std::string, CaseMaker>> cases;
  cases.emplace_back("matmul", [](Rng& rng) {
    const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
    return LeafCase{{normal_values(m * k, rng), normal_values(k * n, rng)},
                    {{m, k}, {k, n}},
                    [](Tape&, std::span<const Tensor> x) { return matmul(x[0], x[1]); }};
  });
  cases.emplace_back("matmul_vector", [](Rng& rng) {
    const std::size_t k = dim(rng), n = dim(rng);
    return LeafCase{{normal_values(k, rng), normal_values(k * n, rng), normal_values(n, rng)},
                    {{k}, {k, n}, {n}},
                    [](Tape&, std::span<const Tensor> x) { return matmul(matmul(x[0], x[1]), x[2]); }};
  });
  cases.emplace_back("concat", [](Rng& rng) {
    const std::size_t a = dim(rng, 0, 4), b = dim(rng);
    return LeafCase{{normal_values(a, rng), normal_values(b, rng)},
                    {{a}, {b}},
                    [](Tape&, std::span<const Tensor> x) { return concat(x[0], x[1]); }};
  });
  cases.emplace_back("stack", [](Rng& rng) {
    const std::size_t n = dim(rng);
    LeafCase c;
    for (std::size_t i = 0; i < n; ++i) {
      c.inputs.push_back(normal_values(1, rng));
      c.shapes.push_back({});
    }
    c.op = [](Tape&, std::span<const Tensor> x) { return stack(x); };
    return c;
  });
  cases.emplace_back("slice", [](Rng& rng) {
    const std::size_t n = dim(rng, 2, 6);
    const std::size_t off = dim(rng, 0, n - 1);
    const std::size_t len = dim(rng, 1, n - off);
    return LeafCase{{normal_values(n, rng)}, {{n}},
                    [off, len](Tape&, std::span<const Tensor> x) { return slice(x[0], off, len); }};
  });
  cases.emplace_back("add", [](Rng& rng) { return binary(rng, [](auto& a, auto& b) { return add(a, b); }); });
  cases.emplace_back("sub", [](Rng& rng) { return binary(rng, [](auto& a, auto& b) { return sub(a, b); }); });
  cases.emplace_back("mul", [](Rng& rng) { return binary(rng, [](auto& a, auto& b) { return mul(a, b); }); });
  cases.emplace_back("scale", [](Rng& rng) {
    const double f = normal_values(1, rng)[0];
    return unary(rng, [f](const Tensor& x) { return scale(x, f); });
  });
  cases.emplace_back("negate", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return negate(x); }); });
  cases.emplace_back("sigmoid", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return sigmoid(x); }, -6, 6); });
  cases.emplace_back("tanh", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return tanh(x); }); });
  cases.emplace_back("log", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return log(x); }, 0.5, 3.0); });
  cases.emplace_back("exp", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return exp(x); }); });
  cases.emplace_back("softmax", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return softmax(x); }, -3, 3); });
  cases.emplace_back("logsumexp",
                     [](Rng& rng) { return unary(rng, [](const Tensor& x) { return logsumexp(x); }, -3, 3); });
  cases.emplace_back("sum", [](Rng& rng) { return unary(rng, [](const Tensor& x) { return sum(x); }); });
  cases.emplace_back("pick", [](Rng& rng) {
    LeafCase c = unary(rng, [](const Tensor& x) { return x; });
    const std::size_t i = dim(rng, 0, c.inputs[0].size() - 1);
    c.op = [i](Tape&, std::span<const Tensor> x) { return pick(x[0], i); };
    return c;
  });
  cases.emplace_back("lstm_gates", [](Rng& rng) {
    const std::size_t h = dim(rng, 1, 5);
    return LeafCase{{normal_values(4 * h, rng), normal_values(h, rng)},
                    {{4 * h}, {h}},
                    [](Tape&, std::span<const Tensor> x) { return lstm_gates(x[0], x[1]); }};
  });
  cases.emplace_back("squared_norm",
                     [](Rng& rng) { return unary(rng, [](const Tensor& x) { return squared_norm(x); }); });
  return cases;
}

GradcheckResult finish(std::string name, std::size_t trials, double worst, double tolerance) {
  return {std::move(name), trials, worst, worst < tolerance};
}

}  // namespace

std::vector<GradcheckResult> run_gradient_suite(std::uint64_t seed, std::size_t trials, double step,
                                                double tolerance) {
  std::vector<GradcheckResult> results;
  Rng rng(seed);

  for (const auto& [name, make] : leaf_cases()) {
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      LeafCase c = make(rng);
      const auto weights_seed = rng();
      auto op = c.op;
      LeafLoss loss = [op, weights_seed](Tape& tape, std::span<const Tensor> x) {
        Rng wr(weights_seed);
        return weighted_sum(tape, op(tape, x), wr);
      };
      worst = std::max(worst, leaf_gradient_error(c.inputs, c.shapes, loss, step));
    }
    results.push_back(finish(name, trials, worst, tolerance));
  }

  {
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t in = dim(rng), h = dim(rng);
      ParamStore store;
      const LstmCell cell = LstmCell::create(store, "cell", in, h);
      const ParamId x = store.add("x", {in});
      const ParamId h0 = store.add("h", {h});
      const ParamId c0 = store.add("c", {h});
      const auto init = normal_values(store.size(), rng, 0.7);
      std::copy(init.begin(), init.end(), store.flat_values().begin());
      const auto w1 = rng(), w2 = rng();
      auto loss = [&, w1, w2](Tape& tape) {
        auto next = lstm_step(cell, tape.param(x), tape.param(h0), tape.param(c0));
        Rng r1(w1), r2(w2);
        return add(weighted_sum(tape, next.h, r1), weighted_sum(tape, next.c, r2));
      };
      std::vector<std::size_t> all(store.size());
      for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
      worst = std::max(worst, param_gradient_error(store, loss, all, step));
    }
    results.push_back(finish("lstm_step", trials, worst, tolerance));
  }

  {
    EncoderConfig config{3, 4, 3, 4, 5, 20, 0.5};
    const std::vector<std::string> texts = {"hello there", "reset my password", "sure thing, bye",
                                            "what can i do?", "go to xx_url_xx"};
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      ConversationModel model(config, Vocab::build(texts));
      model.initialize(rng());
      Dialog dialog{"d", {{texts[0], texts[3]}, {texts[1], texts[4]}}, "check"};
      RankingInstance inst{"d", 2, texts[4], {texts[2], texts[3], "unknown words here"}};
      auto loss = [&](Tape& tape) {
        EncodeSession session(model.encoder(), tape);
        const DialogState s = session.encode_prefix(dialog, inst.turn);
        return ranking_loss(session, model.scorer(), s.s, inst);
      };
      // Padding rows are frozen: they never receive gradient.
      std::vector<std::size_t> trainable;
      const ParamStore& store = model.params();
      for (std::size_t k = 0; k < store.size(); ++k) trainable.push_back(k);
      for (const EmbeddingTable* table : {&model.encoder().char_table(), &model.encoder().word_table()}) {
        const std::size_t begin = store.info(table->weight).offset + EmbeddingTable::kPadding * table->dim;
        std::erase_if(trainable, [&](std::size_t k) { return k >= begin && k < begin + table->dim; });
      }
      std::uniform_int_distribution<std::size_t> pick_index(0, trainable.size() - 1);
      std::vector<std::size_t> indices(20);
      for (auto& k : indices) k = trainable[pick_index(rng)];
      worst = std::max(worst, param_gradient_error(model.params(), loss, indices, step));
    }
    results.push_back(finish("encoder_ranker", trials, worst, tolerance));
  }

  {
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t n = dim(rng, 1, 8);
      ConsolidationConfig cfg{ConsolidationMode::Adaptive, uniform_values(1, 0.001, 2.0, rng)[0], 0.9, 1e-3};
      ConsolidationState state(cfg, n);
      state.restore(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), uniform_values(n, 0.0, 3.0, rng),
                    normal_values(n, rng));
      LeafLoss loss = [&state](Tape&, std::span<const Tensor> x) { return state.surrogate_penalty(x[0]); };
      worst = std::max(worst, leaf_gradient_error({normal_values(n, rng)}, {{n}}, loss, step));
    }
    results.push_back(finish("surrogate_penalty", trials, worst, tolerance));
  }
  return results;
}

}  // namespace convcl
