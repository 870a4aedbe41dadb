#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convcl/consolidation.hpp"
#include "convcl/dialog.hpp"
#include "convcl/model.hpp"
#include "convcl/optim.hpp"

namespace convcl {

// ---------------------------------------------------------------------------
// Training and evaluation of one model

struct TrainOptions {
  std::size_t epochs = 100;
  double clip_norm = 5.0;
  double dropout = 0.0;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t dropout_seed = 0;
};

struct TrainStats {
  std::size_t steps = 0;
  std::vector<double> epoch_mean_loss;  // task loss only
};

/// Dialogs of one task keyed by id, for resolving instance contexts.
class DialogIndex {
 public:
  explicit DialogIndex(std::span<const Dialog> dialogs);
  [[nodiscard]] const Dialog& at(std::string_view id) const;

 private:
  std::map<std::string, const Dialog*, std::less<>> by_id_;
};

/// Batch-size-1 training: per instance (shuffled each epoch), task loss plus
/// surrogate penalty, backward, global-norm clip, Adam, then consolidation
/// bookkeeping with the unclipped task-loss gradient and the applied step.
TrainStats train_task(ConversationModel& model, const DialogIndex& dialogs,
                      std::span<const RankingInstance> instances, AdamState& adam,
                      ConsolidationState& consolidation, const TrainOptions& options);

/// Task loss of one instance and its gradient (flat, aligned with the store).
double instance_loss_and_grad(ConversationModel& model, const Dialog& dialog, const RankingInstance& instance,
                              std::vector<double>& grad_out);

/// Accumulates squared log-likelihood gradients over `instances` at the
/// current parameters.
void estimate_fisher(ConversationModel& model, const DialogIndex& dialogs,
                     std::span<const RankingInstance> instances, ConsolidationState& consolidation);

struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  [[nodiscard]] double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Per-turn action selection against every action in `inventory`.
EvalResult evaluate(ConversationModel& model, std::span<const Dialog> dialogs,
                    std::span<const std::string> inventory);

// ---------------------------------------------------------------------------
// Schedules

enum class Scheme { NoTransfer, WeightTransfer, Aewc, FisherEwc };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view text);

struct TaskSpec {
  std::string name;
  std::vector<Dialog> dialogs;
  std::vector<RankingInstance> instances;  // built from `dialogs` when empty
  std::size_t epochs = 100;
};

struct EvalSet {
  std::string name;
  std::vector<Dialog> dialogs;
};

struct Schedule {
  std::vector<TaskSpec> tasks;  // the last one is the few-shot target
  std::vector<Scheme> schemes = {Scheme::NoTransfer, Scheme::WeightTransfer, Scheme::Aewc};
  std::vector<std::size_t> sizes = {1, 2, 3, 4, 5};
  std::vector<EvalSet> evals;
  std::uint64_t seed = 1;
  std::string preset = "desk";
  EncoderConfig encoder = EncoderConfig::desk();
  ConsolidationConfig consolidation{ConsolidationMode::Off, 0.01, 0.999, 1e-3};
  AdamConfig adam;
  double clip_norm = 5.0;
  double dropout = 0.0;
  std::size_t distractors = 9;
  bool reset_adam_between_tasks = false;
  /// Write one checkpoint per (scheme, size) here when non-empty.
  std::filesystem::path checkpoint_dir;
};

/// Stream seeds derived from the run seed by fixed offsets.
struct SeedStreams {
  std::uint64_t init, shuffle, sampling, generation, dropout;
  static SeedStreams from(std::uint64_t seed) {
    return {seed + 1000, seed + 2000, seed + 3000, seed + 4000, seed + 5000};
  }
};

struct SyntheticOptions {
  std::uint64_t seed = 1;
  bool hh_first_task = false;  // hh_like instead of open_close as task 1
  std::size_t open_close_dialogs = 10;
  std::size_t hh_dialogs = 40;
  std::size_t task_train_dialogs = 40;
  std::size_t eval_dialogs = 60;
  std::uint64_t first_task_generation_seed = 0;  // 0: derived from `seed`
  std::size_t epochs = 100;
};

/// Instances of `task` whose dialogs are among its first `n`.
std::vector<RankingInstance> few_shot_instances(const TaskSpec& task, std::span<const RankingInstance> all,
                                                std::size_t n);

/// Two-task schedule on generated corpora: task 1 is open_close (or
/// hh_like), task 2 the password-reset task; evaluation on a held-out task
/// corpus ("base") and the same dialogs spliced with task-1 openings and
/// closings ("plus").
Schedule synthetic_schedule(const SyntheticOptions& options);

/// Builds a schedule from a JSON config. Either "synthetic" (an object of
/// SyntheticOptions fields) or explicit "tasks" and "evals" with JSONL file
/// paths resolved against `base_dir`. Hyperparameter keys: "seed",
/// "preset", "schemes", "sizes", "c", "lambda", "zeta", "dropout",
/// "epochs", "distractors", "clip_norm", "lr", "reset_adam".
Schedule schedule_from_config(std::string_view json_text, const std::filesystem::path& base_dir);

/// Consolidation settings a scheme trains with.
ConsolidationConfig scheme_consolidation(const Schedule& schedule, Scheme scheme);

/// Checks scheme/task-count compatibility, sizes and hyperparameters.
void validate_schedule(const Schedule& schedule);

/// Hex digest of the configuration and every input record.
std::string schedule_fingerprint(const Schedule& schedule);

struct AccuracyCell {
  std::string scheme;
  std::size_t size = 0;
  std::string eval;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;

  friend bool operator==(const AccuracyCell&, const AccuracyCell&) = default;
};

struct LossCurve {
  std::string scheme;
  std::size_t size = 0;  // 0 for prior tasks shared by every size
  std::string task;
  std::vector<double> epoch_loss;

  friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

struct RunReport {
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::string preset;
  std::vector<std::string> schemes;
  std::vector<std::size_t> sizes;
  std::vector<std::string> evals;
  std::vector<AccuracyCell> cells;
  std::vector<LossCurve> curves;
  double wall_seconds = 0.0;  // not part of equality or results.json

  [[nodiscard]] const AccuracyCell* find(std::string_view scheme, std::size_t size, std::string_view eval) const;

  friend bool operator==(const RunReport& a, const RunReport& b) {
    return a.fingerprint == b.fingerprint && a.seed == b.seed && a.preset == b.preset &&
           a.schemes == b.schemes && a.sizes == b.sizes && a.evals == b.evals && a.cells == b.cells &&
           a.curves == b.curves;
  }
};

/// Observer for long runs; receives one line per finished unit of work.
using ProgressFn = void (*)(const std::string& line);

RunReport run_schedule(const Schedule& schedule, ProgressFn progress = nullptr);

/// Flat parameters after training each (scheme, size) cell, for bit-level
/// comparisons between runs. Same training path as run_schedule.
std::map<std::string, std::vector<double>> run_schedule_parameters(const Schedule& schedule);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(std::string_view text);
/// Human-readable accuracy table: one panel per eval set, rows by train size.
std::string render_table(const RunReport& report);

/// Writes results.json (deterministic) and report.txt into `dir`.
void emit_report(const RunReport& report, const std::filesystem::path& dir);

}  // namespace convcl
