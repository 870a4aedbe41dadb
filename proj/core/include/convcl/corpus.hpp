#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convcl/dialog.hpp"
#include "convcl/layers.hpp"

namespace convcl {

enum class CorpusKind { OpenClose, Task, TaskPlus, HhLike };

std::string_view to_string(CorpusKind kind);
CorpusKind parse_corpus_kind(std::string_view text);

/// Several user phrasings that all receive the same system action.
struct Exchange {
  std::vector<std::string> users;
  std::string system;
};

/// One problem the task flow can handle.
struct TaskIssue {
  std::vector<std::string> problems;
  std::string offer;
  std::string solution;  // ends with the confirmation question
};

struct CorpusSpec {
  CorpusKind kind = CorpusKind::OpenClose;
  std::size_t dialogs = 10;
  std::uint64_t seed = 0;

  // open_close
  std::vector<Exchange> openings;
  std::vector<Exchange> closings;

  // task: turn-count mixture over partial (1 turn), accept/reject (2 turns)
  // and accept-then-complication (3 turns) dialogs.
  std::vector<TaskIssue> issues;
  std::vector<std::string> accepts;
  std::vector<std::string> rejects;
  std::vector<std::string> complications;
  std::string escalation;
  double partial_rate = 0.25;
  double accept_rate = 0.35;
  double reject_rate = 0.22;

  // hh_like
  std::vector<std::string> agent_names;
};

/// Built-in template pools for `kind` with the given size and seed.
CorpusSpec default_corpus_spec(CorpusKind kind, std::size_t dialogs, std::uint64_t seed);

/// JSON object with "kind", "dialogs", "seed" and optional pool overrides
/// ("openings", "closings", "issues", "accepts", "rejects",
/// "complications", "escalation", "agent_names", the three rates).
/// Absent keys keep the built-in defaults.
CorpusSpec parse_corpus_spec(std::string_view json_text);
std::string corpus_spec_to_json(const CorpusSpec& spec);

std::vector<Dialog> generate_open_close(const CorpusSpec& spec);
std::vector<Dialog> generate_task(const CorpusSpec& spec);
std::vector<Dialog> generate_hh_like(const CorpusSpec& spec);
/// Dispatches on spec.kind. TaskPlus splices a task corpus with an
/// open_close corpus derived from the same seed.
std::vector<Dialog> generate(const CorpusSpec& spec);

/// Prepends an opening exchange and appends a closing exchange, each taken
/// from a randomly chosen open_close dialog.
std::vector<Dialog> splice_plus(std::span<const Dialog> task_dialogs, std::span<const Dialog> open_close,
                                Rng& rng);

/// Sorted unique system actions.
std::vector<std::string> system_inventory(std::span<const Dialog> dialogs);

/// One instance per (dialog, turn) with k distractors from `inventory`.
std::vector<RankingInstance> build_instances(std::span<const Dialog> dialogs,
                                             std::span<const std::string> inventory, std::size_t k,
                                             Rng& rng);

struct CorpusStats {
  std::size_t dialogs = 0;
  double avg_dialog_len = 0.0;
  double avg_user_len = 0.0;
  double avg_system_len = 0.0;
};

CorpusStats compute_stats(std::span<const Dialog> dialogs);

// JSON Lines I/O.
std::string dialog_to_json(const Dialog& dialog);
Dialog dialog_from_json(std::string_view line);
std::string instance_to_json(const RankingInstance& instance);
RankingInstance instance_from_json(std::string_view line);

void write_dialogs(const std::filesystem::path& path, std::span<const Dialog> dialogs);
std::vector<Dialog> read_dialogs(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path, std::span<const RankingInstance> instances);
std::vector<RankingInstance> read_instances(const std::filesystem::path& path);

}  // namespace convcl
