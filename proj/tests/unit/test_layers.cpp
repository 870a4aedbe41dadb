#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "convcl/errors.hpp"
#include "convcl/layers.hpp"
#include "oracles.hpp"

using namespace convcl;

namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(LstmStep, ZeroParametersAndStateGiveZero) {
  ParamStore store;
  auto cell = LstmCell::create(store, "cell", 3, 2);
  Tape tape(store);
  auto x = tape.constant({0.7, -1.2, 4.0}, {3});
  auto zero = lstm_zero_state(tape, cell);
  auto next = lstm_step(cell, x, zero.h, zero.c);
  EXPECT_EQ(vec(next.h.values()), (std::vector<double>{0, 0}));
  EXPECT_EQ(vec(next.c.values()), (std::vector<double>{0, 0}));
}

TEST(LstmStep, GatesAtOneHalf) {
  ParamStore store;
  auto cell = LstmCell::create(store, "cell", 2, 1);
  Tape tape(store);
  auto next = lstm_step(cell, tape.constant({3.0, -5.0}, {2}), tape.constant({0.0}, {1}), tape.constant({1.0}, {1}));
  EXPECT_DOUBLE_EQ(next.c.values()[0], 0.5);
  EXPECT_NEAR(next.h.values()[0], 0.5 * std::tanh(0.5), 1e-15);
  EXPECT_NEAR(next.h.values()[0], 0.2311, 1e-4);
}

TEST(LstmStep, DimensionMismatch) {
  ParamStore store;
  auto cell = LstmCell::create(store, "cell", 3, 2);
  Tape tape(store);
  auto zero = lstm_zero_state(tape, cell);
  EXPECT_THROW((void)lstm_step(cell, tape.constant({1, 2}, {2}), zero.h, zero.c), DimensionError);
  EXPECT_THROW((void)lstm_step(cell, tape.constant({1, 2, 3}, {3}), tape.constant({1}, {1}), zero.c),
               DimensionError);
}

TEST(LstmStep, PreservesDimensionsOverSequence) {
  ParamStore store;
  auto cell = LstmCell::create(store, "cell", 4, 3);
  Rng rng(1);
  cell.initialize(store, rng);
  Tape tape(store);
  auto state = lstm_zero_state(tape, cell);
  for (int t = 0; t < 5; ++t) {
    state = lstm_step(cell, tape.constant(oracle::normal_vector(4, rng), {4}), state.h, state.c);
    ASSERT_EQ(state.h.shape(), (Shape{3}));
    ASSERT_EQ(state.c.shape(), (Shape{3}));
  }
}

TEST(LstmInit, BlocksAreOrthogonalAndForgetBiasIsOne) {
  const std::size_t in = 5, h = 3;
  ParamStore store;
  auto cell = LstmCell::create(store, "cell", in, h);
  Rng rng(9);
  cell.initialize(store, rng);
  const auto w = vec(store.values(cell.weight));
  const auto b = vec(store.values(cell.bias));
  for (std::size_t gate = 0; gate < 4; ++gate) {
    for (auto [offset, width] : {std::pair<std::size_t, std::size_t>{0, in}, {in, h}}) {
      std::vector<double> block(h * width);
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < width; ++c) block[r * width + c] = w[(gate * h + r) * (in + h) + offset + c];
      }
      for (double s : oracle::singular_values(block, h, width)) EXPECT_NEAR(s, 1.0, 1e-10);
    }
    for (std::size_t r = 0; r < h; ++r) EXPECT_EQ(b[gate * h + r], gate == 1 ? 1.0 : 0.0);
  }
}

TEST(OrthogonalInit, SingularValuesAreOneForAnyAspect) {
  Rng rng(4);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{4, 4}, {6, 3}, {3, 7}, {1, 5}, {5, 1}}) {
    const auto m = orthogonal_init(rows, cols, rng);
    ASSERT_EQ(m.size(), rows * cols);
    for (double s : oracle::singular_values(m, rows, cols)) EXPECT_NEAR(s, 1.0, 1e-10);
  }
}

TEST(UniformInit, StaysInBounds) {
  Rng rng(2);
  const auto v = uniform_init(10000, 0.01, rng);
  double mean = 0.0;
  for (double x : v) {
    EXPECT_GE(x, -0.01);
    EXPECT_LE(x, 0.01);
    mean += x;
  }
  EXPECT_NEAR(mean / 10000.0, 0.0, 5e-4);
}

TEST(BiLstm, EmptySequenceIsDomainError) {
  ParamStore store;
  auto f = LstmCell::create(store, "f", 2, 2);
  auto b = LstmCell::create(store, "b", 2, 2);
  EXPECT_THROW((void)run_bilstm(f, b, {}), DomainError);
}

TEST(BiLstm, DirectionsReadOppositeEnds) {
  ParamStore store;
  auto f = LstmCell::create(store, "f", 1, 2);
  auto b = LstmCell::create(store, "b", 1, 2);
  Rng rng(8);
  f.initialize(store, rng);
  b.initialize(store, rng);
  Tape tape(store);
  const Tensor seq[] = {tape.constant({1.0}, {1}), tape.constant({-2.0}, {1})};
  auto [fwd, bwd] = run_bilstm(f, b, seq);
  // Forward final state equals stepping f over the sequence in order.
  auto s = lstm_zero_state(tape, f);
  s = lstm_step(f, seq[0], s.h, s.c);
  s = lstm_step(f, seq[1], s.h, s.c);
  EXPECT_EQ(vec(fwd.values()), vec(s.h.values()));
  auto r = lstm_zero_state(tape, b);
  r = lstm_step(b, seq[1], r.h, r.c);
  r = lstm_step(b, seq[0], r.h, r.c);
  EXPECT_EQ(vec(bwd.values()), vec(r.h.values()));
}

TEST(Embedding, LookupReturnsRowAndMapsUnknown) {
  ParamStore store;
  auto table = EmbeddingTable::create(store, "emb", 4, 2);
  Rng rng(1);
  table.initialize_uniform(store, rng, 0.5);
  const auto w = vec(store.values(table.weight));
  Tape tape(store);
  EXPECT_EQ(vec(table.lookup(tape, 3).values()), (std::vector<double>{w[6], w[7]}));
  EXPECT_EQ(vec(table.lookup(tape, 99).values()), (std::vector<double>{w[2], w[3]}));
  EXPECT_EQ(vec(table.lookup(tape, EmbeddingTable::kPadding).values()), (std::vector<double>{0, 0}));
}

TEST(Embedding, PaddingRowStaysFrozen) {
  ParamStore store;
  auto table = EmbeddingTable::create(store, "emb", 3, 2);
  Tape tape(store);
  tape.backward(add(sum(table.lookup(tape, 0)), sum(table.lookup(tape, 2))));
  EXPECT_EQ(vec(store.grads(table.weight)), (std::vector<double>{0, 0, 0, 0, 1, 1}));
}

TEST(Embedding, NeedsReservedRows) {
  ParamStore store;
  EXPECT_THROW((void)EmbeddingTable::create(store, "emb", 1, 2), ConfigError);
}

TEST(Dropout, EvalModeIsIdentity) {
  DropoutLayer d(0.4, 3);
  Tape tape;
  auto x = tape.constant({1, 2, 3}, {3});
  EXPECT_EQ(d.apply(x).id(), x.id());
}

TEST(Dropout, RatioMustBeBelowOne) {
  EXPECT_THROW(DropoutLayer(1.0, 0), ConfigError);
  EXPECT_THROW(DropoutLayer(-0.1, 0), ConfigError);
}

TEST(Dropout, TrainModeDropsAtRateAndPreservesMean) {
  const double p = 0.4;
  DropoutLayer d(p, 17);
  d.train();
  const std::size_t n = 200000;
  Tape tape;
  auto y = d.apply(tape.constant(std::vector<double>(n, 2.0), {n}));
  std::size_t zeros = 0;
  double total = 0.0;
  for (double v : y.values()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 2.0 / (1.0 - p));
    }
    total += v;
  }
  // Binomial standard error of the drop fraction is about 0.0011.
  EXPECT_NEAR(static_cast<double>(zeros) / n, p, 0.006);
  EXPECT_NEAR(total / n, 2.0, 0.02);
}
