#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "convcl/corpus.hpp"
#include "convcl/encoder.hpp"
#include "convcl/errors.hpp"
#include "oracles.hpp"

using namespace convcl;

namespace {

std::set<std::string> users_of(std::span<const Dialog> dialogs) {
  std::set<std::string> out;
  for (const auto& d : dialogs) {
    for (const auto& t : d.turns) out.insert(t.user);
  }
  return out;
}

std::size_t total_turns(std::span<const Dialog> dialogs) {
  std::size_t n = 0;
  for (const auto& d : dialogs) n += d.length();
  return n;
}

}  // namespace

TEST(OpenClose, TwoTurnsAndDefaultCount) {
  const auto spec = default_corpus_spec(CorpusKind::OpenClose, 10, 3);
  const auto dialogs = generate_open_close(spec);
  ASSERT_EQ(dialogs.size(), 10u);
  for (const auto& d : dialogs) EXPECT_EQ(d.length(), 2u);
  const auto stats = compute_stats(dialogs);
  EXPECT_EQ(stats.dialogs, 10u);
  EXPECT_EQ(stats.avg_dialog_len, 2.0);
}

TEST(OpenClose, TurnsComeFromOpeningThenClosingPools) {
  const auto spec = default_corpus_spec(CorpusKind::OpenClose, 25, 4);
  std::set<std::string> opening_actions, closing_actions;
  for (const auto& e : spec.openings) opening_actions.insert(e.system);
  for (const auto& e : spec.closings) closing_actions.insert(e.system);
  for (const auto& d : generate_open_close(spec)) {
    EXPECT_TRUE(opening_actions.count(d.turns[0].system)) << d.turns[0].system;
    EXPECT_TRUE(closing_actions.count(d.turns[1].system)) << d.turns[1].system;
  }
}

TEST(OpenClose, EmptyPoolIsConfigError) {
  auto spec = default_corpus_spec(CorpusKind::OpenClose, 10, 1);
  spec.closings.clear();
  EXPECT_THROW((void)generate_open_close(spec), ConfigError);
}

TEST(Task, MeanLengthNearTarget) {
  const auto dialogs = generate_task(default_corpus_spec(CorpusKind::Task, 2000, 11));
  const double mean = compute_stats(dialogs).avg_dialog_len;
  EXPECT_NEAR(mean, 1.93, 0.3);
  for (const auto& d : dialogs) {
    EXPECT_GE(d.length(), 1u);
    EXPECT_LE(d.length(), 3u);
  }
}

TEST(Task, CompleteDialogsEndInSolutionOrEscalation) {
  const auto spec = default_corpus_spec(CorpusKind::Task, 500, 12);
  std::set<std::string> finals = {spec.escalation};
  std::set<std::string> offers;
  for (const auto& issue : spec.issues) {
    finals.insert(issue.solution);
    offers.insert(issue.offer);
  }
  for (const auto& d : generate_task(spec)) {
    if (d.length() == 1) {
      EXPECT_TRUE(offers.count(d.turns[0].system));
      continue;
    }
    EXPECT_TRUE(finals.count(d.turns.back().system)) << d.turns.back().system;
  }
}

TEST(Task, HasNoOpeningOrClosingTurns) {
  const auto task = generate_task(default_corpus_spec(CorpusKind::Task, 500, 13));
  const auto oc_spec = default_corpus_spec(CorpusKind::OpenClose, 10, 13);
  std::set<std::string> oc_users, oc_actions;
  for (const auto* pool : {&oc_spec.openings, &oc_spec.closings}) {
    for (const auto& e : *pool) {
      oc_actions.insert(e.system);
      oc_users.insert(e.users.begin(), e.users.end());
    }
  }
  for (const auto& d : task) {
    for (const auto& t : d.turns) {
      EXPECT_FALSE(oc_actions.count(t.system)) << t.system;
      EXPECT_FALSE(oc_users.count(t.user)) << t.user;
    }
  }
}

TEST(Task, ConsecutiveDialogsCoverEveryIssue) {
  const auto spec = default_corpus_spec(CorpusKind::Task, 40, 14);
  const auto dialogs = generate_task(spec);
  const std::size_t k = spec.issues.size();
  for (std::size_t start = 0; start + k <= dialogs.size(); start += k) {
    std::set<std::string> offers;
    for (std::size_t i = start; i < start + k; ++i) offers.insert(dialogs[i].turns[0].system);
    EXPECT_EQ(offers.size(), k);
  }
}

TEST(Task, BadRatesAreConfigError) {
  auto spec = default_corpus_spec(CorpusKind::Task, 10, 1);
  spec.accept_rate = 0.9;
  EXPECT_THROW((void)generate_task(spec), ConfigError);
}

TEST(SplicePlus, AddsExactlyTwoTurnsAndPreservesInner) {
  const auto task = generate_task(default_corpus_spec(CorpusKind::Task, 300, 21));
  const auto oc = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 10, 22));
  Rng rng(5);
  const auto plus = splice_plus(task, oc, rng);
  ASSERT_EQ(plus.size(), task.size());
  const auto oc_users = users_of(oc);
  for (std::size_t i = 0; i < task.size(); ++i) {
    ASSERT_EQ(plus[i].length(), task[i].length() + 2);
    EXPECT_TRUE(std::equal(task[i].turns.begin(), task[i].turns.end(), plus[i].turns.begin() + 1));
    EXPECT_TRUE(oc_users.count(plus[i].turns.front().user));
  }
  EXPECT_DOUBLE_EQ(compute_stats(plus).avg_dialog_len, compute_stats(task).avg_dialog_len + 2.0);
}

TEST(SplicePlus, OpeningsAndClosingsComeFromTheRightEnds) {
  const auto task = generate_task(default_corpus_spec(CorpusKind::Task, 50, 23));
  const auto oc = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 10, 24));
  std::set<std::string> first_actions, last_actions;
  for (const auto& d : oc) {
    first_actions.insert(d.turns.front().system);
    last_actions.insert(d.turns.back().system);
  }
  Rng rng(6);
  for (const auto& d : splice_plus(task, oc, rng)) {
    EXPECT_TRUE(first_actions.count(d.turns.front().system));
    EXPECT_TRUE(last_actions.count(d.turns.back().system));
  }
}

TEST(SplicePlus, InventoryIsUnion) {
  const auto task = generate_task(default_corpus_spec(CorpusKind::Task, 400, 25));
  const auto oc = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 10, 26));
  Rng rng(7);
  const auto plus = splice_plus(task, oc, rng);
  std::set<std::string> expected;
  for (const auto& a : system_inventory(task)) expected.insert(a);
  for (const auto& a : system_inventory(oc)) expected.insert(a);
  const auto inv = system_inventory(plus);
  EXPECT_EQ(std::set<std::string>(inv.begin(), inv.end()), expected);
}

TEST(SplicePlus, SeededChoicesAndEmptyInputs) {
  const auto task = generate_task(default_corpus_spec(CorpusKind::Task, 30, 27));
  const auto oc = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 10, 28));
  Rng a(9), b(9);
  EXPECT_EQ(splice_plus(task, oc, a), splice_plus(task, oc, b));
  Rng c(1);
  EXPECT_THROW((void)splice_plus(task, {}, c), DomainError);
}

TEST(Instances, OnePerTurnAndRoundTrip) {
  const auto dialogs = generate_task(default_corpus_spec(CorpusKind::Task, 60, 31));
  const auto inventory = system_inventory(dialogs);
  Rng rng(3);
  const auto instances = build_instances(dialogs, inventory, 9, rng);
  EXPECT_EQ(instances.size(), total_turns(dialogs));
  for (const auto& inst : instances) EXPECT_EQ(instance_from_json(instance_to_json(inst)), inst);
  const auto dir = oracle::scratch_dir("instances");
  write_instances(dir / "i.jsonl", instances);
  EXPECT_EQ(read_instances(dir / "i.jsonl"), instances);
}

TEST(Instances, TwoTurnDialogGivesTwo) {
  const auto dialogs = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 1, 1));
  const auto all = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 10, 1));
  const auto inventory = system_inventory(all);
  Rng rng(1);
  const auto instances = build_instances(dialogs, inventory, 3, rng);
  ASSERT_EQ(instances.size(), 2u);
  EXPECT_EQ(instances[0].turn, 1u);
  EXPECT_EQ(instances[1].turn, 2u);
}

TEST(Instances, SmallInventoryIsSamplingError) {
  const auto dialogs = generate_open_close(default_corpus_spec(CorpusKind::OpenClose, 2, 1));
  const std::vector<std::string> inventory = {dialogs[0].turns[0].system, "other"};
  Rng rng(1);
  EXPECT_THROW((void)build_instances(dialogs, inventory, 9, rng), SamplingError);
}

TEST(Stats, Examples) {
  const Dialog single{"x", {{"a b", "s"}, {"a b c d", "s t"}}, "t"};
  const auto s = compute_stats(std::span<const Dialog>(&single, 1));
  EXPECT_EQ(s.avg_dialog_len, 2.0);
  EXPECT_EQ(s.avg_user_len, 3.0);
  EXPECT_EQ(s.avg_system_len, 1.5);
  EXPECT_THROW((void)compute_stats({}), DomainError);
}

TEST(Stats, TokenCountsUseEncoderTokenizer) {
  const auto dialogs = generate_task(default_corpus_spec(CorpusKind::Task, 40, 41));
  std::size_t tokens = 0;
  for (const auto& d : dialogs) {
    for (const auto& t : d.turns) tokens += tokenize(t.user).size();
  }
  EXPECT_DOUBLE_EQ(compute_stats(dialogs).avg_user_len, static_cast<double>(tokens) / total_turns(dialogs));
}

TEST(Determinism, SameSeedSameBytes) {
  const auto dir = oracle::scratch_dir("determinism");
  for (auto kind : {CorpusKind::OpenClose, CorpusKind::Task, CorpusKind::TaskPlus, CorpusKind::HhLike}) {
    const auto spec = default_corpus_spec(kind, 30, 77);
    write_dialogs(dir / "a.jsonl", generate(spec));
    write_dialogs(dir / "b.jsonl", generate(spec));
    const auto a = oracle::slurp(dir / "a.jsonl");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, oracle::slurp(dir / "b.jsonl")) << to_string(kind);
    EXPECT_EQ(read_dialogs(dir / "a.jsonl"), generate(spec));
  }
  EXPECT_NE(generate(default_corpus_spec(CorpusKind::Task, 30, 1)),
            generate(default_corpus_spec(CorpusKind::Task, 30, 2)));
}

TEST(Format, DialogLineShape) {
  const Dialog d{"d1", {{"hi", "hello"}}, "open_close"};
  EXPECT_EQ(dialog_to_json(d), R"({"id":"d1","turns":[["hi","hello"]],"source":"open_close"})");
  EXPECT_EQ(dialog_from_json(dialog_to_json(d)), d);
  EXPECT_THROW((void)dialog_from_json(R"({"id":"x","turns":[],"source":"s"})"), ConfigError);
  EXPECT_THROW((void)dialog_from_json("not json"), ConfigError);
}

TEST(Format, SpecRoundTripAndOverrides) {
  const auto spec = default_corpus_spec(CorpusKind::Task, 12, 5);
  const auto back = parse_corpus_spec(corpus_spec_to_json(spec));
  EXPECT_EQ(generate(back), generate(spec));
  const auto custom = parse_corpus_spec(R"({"kind":"open_close","dialogs":4,"seed":2,
      "openings":[{"users":["yo"],"system":"hey there"}]})");
  for (const auto& d : generate(custom)) EXPECT_EQ(d.turns[0].system, "hey there");
}

TEST(HhLike, LongerDialogsNearTarget) {
  const auto dialogs = generate_hh_like(default_corpus_spec(CorpusKind::HhLike, 400, 51));
  EXPECT_NEAR(compute_stats(dialogs).avg_dialog_len, 12.8, 2.0);
  for (const auto& d : dialogs) EXPECT_NE(d.source.find("hh_like"), std::string::npos);
}
