#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "convcl/consolidation.hpp"
#include "convcl/corpus.hpp"
#include "convcl/harness.hpp"
#include "convcl/layers.hpp"
#include "convcl/model.hpp"
#include "convcl/optim.hpp"
#include "convcl/ranker.hpp"

using namespace convcl;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

struct TaskFixture {
  std::vector<Dialog> dialogs = generate(default_corpus_spec(CorpusKind::Task, 20, 3));
  std::vector<std::string> inventory = system_inventory(dialogs);
  std::vector<RankingInstance> instances;
  ConversationModel model;

  explicit TaskFixture(const EncoderConfig& config) : model(config, vocab_of(dialogs)) {
    Rng rng(4);
    instances = build_instances(dialogs, inventory, 9, rng);
    model.initialize(1);
  }

  static Vocab vocab_of(const std::vector<Dialog>& dialogs) {
    std::vector<std::string> texts;
    for (const auto& d : dialogs) {
      for (const auto& t : d.turns) {
        texts.push_back(t.user);
        texts.push_back(t.system);
      }
    }
    return Vocab::build(texts);
  }
};

}  // namespace

static void BM_LstmStepForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  ParamStore store;
  auto cell = LstmCell::create(store, "cell", hidden, hidden);
  Rng rng(1);
  cell.initialize(store, rng);
  const auto x = noise(hidden, 2);
  for (auto _ : state) {
    Tape tape(store);
    auto s = lstm_zero_state(tape, cell);
    for (int t = 0; t < 10; ++t) s = lstm_step(cell, tape.constant(x, {hidden}), s.h, s.c);
    tape.backward(sum(s.h));
    benchmark::DoNotOptimize(store.flat_grads().data());
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_LstmStepForwardBackward)->ArgName("hidden")->Arg(8)->Arg(32)->Arg(64)->Arg(256);

static void BM_MatMul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n, 1), b = noise(n, 2);
  for (auto _ : state) {
    Tape tape;
    auto y = matmul(tape.variable(a, {n, n}), tape.variable(b, {n}));
    tape.backward(sum(y));
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_MatMul)->ArgName("n")->RangeMultiplier(4)->Range(8, 512);

static void BM_EncodeUtterance(benchmark::State& state) {
  TaskFixture f(EncoderConfig::desk());
  const std::string text = "I forgot my password and now I have locked my account for 30 days";
  for (auto _ : state) {
    Tape tape(f.model.params());
    EncodeSession session(f.model.encoder(), tape);
    benchmark::DoNotOptimize(session.embed_utterance(text).values().data());
  }
}
BENCHMARK(BM_EncodeUtterance);

static void BM_TrainStep(benchmark::State& state) {
  TaskFixture f(state.range(0) == 0 ? EncoderConfig::desk() : EncoderConfig::paper());
  DialogIndex index(f.dialogs);
  AdamState adam(AdamConfig{}, f.model.params().size());
  ConsolidationState cons({ConsolidationMode::Adaptive, 0.01, 0.999, 1e-3}, f.model.params().size());
  cons.on_task_end(f.model.params().flat_values());
  TrainOptions opt;
  opt.epochs = 1;
  std::size_t next = 0;
  for (auto _ : state) {
    const RankingInstance& inst = f.instances[next++ % f.instances.size()];
    benchmark::DoNotOptimize(train_task(f.model, index, std::span(&inst, 1), adam, cons, opt).steps);
  }
  state.SetLabel(state.range(0) == 0 ? "desk" : "paper");
}
BENCHMARK(BM_TrainStep)->ArgName("preset")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Evaluate(benchmark::State& state) {
  TaskFixture f(EncoderConfig::desk());
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(f.model, f.dialogs, f.inventory).correct);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.instances.size()));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

static void BM_ConsolidationOnStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ConsolidationState cons({ConsolidationMode::Adaptive, 0.01, 0.999, 1e-3}, n);
  const auto g = noise(n, 1), d = noise(n, 2);
  for (auto _ : state) cons.on_step(g, d);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConsolidationOnStep)->ArgName("params")->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

static void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  AdamState adam(AdamConfig{}, n);
  auto params = noise(n, 1);
  const auto g = noise(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(adam_step(adam, params, g).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdamStep)->ArgName("params")->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

BENCHMARK_MAIN();
