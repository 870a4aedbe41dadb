#include "convcl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "convcl/corpus.hpp"
#include "convcl/errors.hpp"
#include "convcl/ranker.hpp"

namespace convcl {

using ordered_json = nlohmann::ordered_json;

DialogIndex::DialogIndex(std::span<const Dialog> dialogs) {
  for (const auto& d : dialogs) {
    if (!by_id_.emplace(d.id, &d).second) throw ContractError("duplicate dialog id '" + d.id + "'");
  }
}

const Dialog& DialogIndex::at(std::string_view id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ContractError("instance refers to unknown dialog '" + std::string(id) + "'");
  return *it->second;
}

namespace {

std::string instance_label(const RankingInstance& instance) {
  return instance.dialog_id + "#" + std::to_string(instance.turn);
}

// Forward pass of one instance on `tape`. Returns the loss node.
Tensor forward_instance(ConversationModel& model, Tape& tape, DropoutLayer* dropout, const Dialog& dialog,
                        const RankingInstance& instance) {
  EncodeSession session(model.encoder(), tape, dropout);
  const DialogState state = session.encode_prefix(dialog, instance.turn);
  return ranking_loss(session, model.scorer(), session.regularize(state.s), instance);
}

}  // namespace

double instance_loss_and_grad(ConversationModel& model, const Dialog& dialog, const RankingInstance& instance,
                              std::vector<double>& grad_out) {
  ParamStore& store = model.params();
  store.zero_grad();
  Tape tape(store);
  const Tensor loss = forward_instance(model, tape, nullptr, dialog, instance);
  tape.backward(loss);
  grad_out.assign(store.flat_grads().begin(), store.flat_grads().end());
  return loss.item();
}

TrainStats train_task(ConversationModel& model, const DialogIndex& dialogs,
                      std::span<const RankingInstance> instances, AdamState& adam,
                      ConsolidationState& consolidation, const TrainOptions& options) {
  if (instances.empty()) throw ContractError("train_task: no training instances");
  if (options.epochs < 1) throw ConfigError("train_task: epochs must be at least 1");
  ParamStore& store = model.params();
  const std::size_t n = store.size();
  if (adam.m.size() != n || consolidation.size() != n) {
    throw AlignmentError("train_task: optimizer or consolidation state does not match " + std::to_string(n) +
                         " parameters");
  }

  DropoutLayer dropout(options.dropout, options.dropout_seed);
  dropout.train();
  DropoutLayer* dropout_ptr = options.dropout > 0.0 ? &dropout : nullptr;
  const bool penalize = consolidation.config().mode != ConsolidationMode::Off;

  Rng shuffle_rng(options.shuffle_seed);
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainStats stats;
  std::vector<double> task_grad(n);
  std::vector<double> total_grad(n);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const RankingInstance& instance = instances[idx];
      try {
        store.zero_grad();
        double loss_value = 0.0;
        {
          Tape tape(store);
          const Tensor loss = forward_instance(model, tape, dropout_ptr, dialogs.at(instance.dialog_id), instance);
          loss_value = loss.item();
          if (!std::isfinite(loss_value)) throw NumericError("non-finite loss");
          tape.backward(loss);
        }
        std::copy(store.flat_grads().begin(), store.flat_grads().end(), task_grad.begin());
        total_grad = task_grad;
        if (penalize && consolidation.anchored()) {
          Tape penalty_tape;
          const auto theta_values = store.flat_values();
          const Tensor theta = penalty_tape.variable({theta_values.begin(), theta_values.end()}, {n});
          const Tensor penalty = consolidation.surrogate_penalty(theta);
          penalty_tape.backward(penalty);
          const auto g = theta.grad();
          for (std::size_t k = 0; k < n; ++k) total_grad[k] += g[k];
        }
        clip_global_norm(total_grad, options.clip_norm);
        const auto step = adam_step(adam, store.flat_values(), total_grad);
        consolidation.on_step(task_grad, step);
        loss_sum += loss_value;
        ++stats.steps;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (instance " + instance_label(instance) + ", epoch " +
                           std::to_string(epoch + 1) + ")");
      }
    }
    stats.epoch_mean_loss.push_back(loss_sum / static_cast<double>(instances.size()));
  }
  return stats;
}

void estimate_fisher(ConversationModel& model, const DialogIndex& dialogs,
                     std::span<const RankingInstance> instances, ConsolidationState& consolidation) {
  std::vector<double> grad;
  for (const auto& instance : instances) {
    instance_loss_and_grad(model, dialogs.at(instance.dialog_id), instance, grad);
    consolidation.fisher_update(grad);
  }
  model.params().zero_grad();
}

EvalResult evaluate(ConversationModel& model, std::span<const Dialog> dialogs,
                    std::span<const std::string> inventory) {
  if (inventory.empty()) throw ContractError("evaluate: empty action inventory");
  ParamStore& store = model.params();
  const BilinearScorer& scorer = model.scorer();
  const std::size_t ds = scorer.state_dim;
  const std::size_t du = scorer.action_dim;

  // Candidate embeddings do not depend on the dialog: encode them once.
  std::vector<double> actions(inventory.size() * du);
  {
    Tape tape(store);
    EncodeSession session(model.encoder(), tape);
    for (std::size_t j = 0; j < inventory.size(); ++j) {
      const auto v = session.embed_utterance(inventory[j]).values();
      std::copy(v.begin(), v.end(), actions.begin() + static_cast<std::ptrdiff_t>(j * du));
    }
  }
  const auto matrix = store.values(scorer.matrix);

  EvalResult result;
  std::vector<double> projected(du);
  std::vector<double> scores(inventory.size());
  for (const Dialog& dialog : dialogs) {
    Tape tape(store);
    EncodeSession session(model.encoder(), tape);
    DialogState state = session.initial_state();
    Tensor previous = session.start_action();
    for (const Turn& turn : dialog.turns) {
      state = session.advance_state(state, session.embed_utterance(turn.user), previous);
      const auto s = state.s.values();
      std::fill(projected.begin(), projected.end(), 0.0);
      for (std::size_t r = 0; r < ds; ++r) {
        const double sr = s[r];
        const double* row = matrix.data() + r * du;
        for (std::size_t c = 0; c < du; ++c) projected[c] += sr * row[c];
      }
      for (std::size_t j = 0; j < inventory.size(); ++j) {
        const double* a = actions.data() + j * du;
        double dot = 0.0;
        for (std::size_t c = 0; c < du; ++c) dot += projected[c] * a[c];
        scores[j] = dot;
      }
      const std::size_t best = predict(scores);
      if (inventory[best] == turn.system) ++result.correct;
      ++result.total;
      previous = session.embed_utterance(turn.system);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::NoTransfer: return "NT";
    case Scheme::WeightTransfer: return "WT";
    case Scheme::Aewc: return "AEWC";
    case Scheme::FisherEwc: return "EWC";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "nt") return Scheme::NoTransfer;
  if (lower == "wt") return Scheme::WeightTransfer;
  if (lower == "aewc") return Scheme::Aewc;
  if (lower == "ewc") return Scheme::FisherEwc;
  throw ConfigError("unknown scheme '" + std::string(text) + "' (expected nt, wt, aewc or ewc)");
}

std::vector<RankingInstance> few_shot_instances(const TaskSpec& task, std::span<const RankingInstance> all,
                                           std::size_t n) {
  std::set<std::string, std::less<>> ids;
  if (n > task.dialogs.size()) throw ConfigError("few-shot size exceeds task '" + task.name + "'");
  for (std::size_t i = 0; i < n; ++i) ids.insert(task.dialogs[i].id);
  std::vector<RankingInstance> out;
  for (const auto& inst : all) {
    if (ids.contains(inst.dialog_id)) out.push_back(inst);
  }
  return out;
}

Schedule synthetic_schedule(const SyntheticOptions& options) {
  const SeedStreams streams = SeedStreams::from(options.seed);
  const std::uint64_t gen = streams.generation;
  const std::uint64_t first_seed =
      options.first_task_generation_seed != 0 ? options.first_task_generation_seed : gen;

  Schedule schedule;
  schedule.seed = options.seed;

  TaskSpec first;
  if (options.hh_first_task) {
    first.name = "hh_like";
    first.dialogs = generate(default_corpus_spec(CorpusKind::HhLike, options.hh_dialogs, first_seed));
  } else {
    first.name = "open_close";
    first.dialogs = generate(default_corpus_spec(CorpusKind::OpenClose, options.open_close_dialogs, first_seed));
  }
  first.epochs = options.epochs;

  TaskSpec target;
  target.name = "task";
  target.dialogs = generate(default_corpus_spec(CorpusKind::Task, options.task_train_dialogs, gen + 1));
  target.epochs = options.epochs;

  EvalSet base{"task", generate(default_corpus_spec(CorpusKind::Task, options.eval_dialogs, gen + 2))};
  const auto openers = generate(default_corpus_spec(CorpusKind::OpenClose, options.eval_dialogs, gen + 3));
  Rng splice_rng(gen + 4);
  EvalSet plus{"task+", splice_plus(base.dialogs, openers, splice_rng)};

  schedule.tasks = {std::move(first), std::move(target)};
  schedule.evals = {std::move(base), std::move(plus)};
  return schedule;
}

ConsolidationConfig scheme_consolidation(const Schedule& schedule, Scheme scheme) {
  ConsolidationConfig config = schedule.consolidation;
  switch (scheme) {
    case Scheme::NoTransfer:
    case Scheme::WeightTransfer: config.mode = ConsolidationMode::Off; break;
    case Scheme::Aewc:
      if (config.mode != ConsolidationMode::PathIntegral) config.mode = ConsolidationMode::Adaptive;
      break;
    case Scheme::FisherEwc: config.mode = ConsolidationMode::Fisher; break;
  }
  return config;
}

void validate_schedule(const Schedule& schedule) {
  if (schedule.tasks.empty()) throw ConfigError("schedule has no tasks");
  if (schedule.schemes.empty()) throw ConfigError("schedule has no schemes");
  for (Scheme s : schedule.schemes) {
    if (s != Scheme::NoTransfer && schedule.tasks.size() < 2) {
      throw ConfigError("scheme " + std::string(to_string(s)) + " needs at least two tasks");
    }
  }
  for (const auto& t : schedule.tasks) {
    if (t.epochs < 1) throw ConfigError("task '" + t.name + "': epochs must be at least 1");
    if (t.dialogs.empty()) throw ConfigError("task '" + t.name + "' has no dialogs");
  }
  const auto& last = schedule.tasks.back();
  if (schedule.sizes.empty()) throw ConfigError("schedule has no few-shot sizes");
  for (std::size_t n : schedule.sizes) {
    if (n < 1 || n > last.dialogs.size()) {
      throw ConfigError("few-shot size " + std::to_string(n) + " outside 1.." + std::to_string(last.dialogs.size()));
    }
  }
  if (schedule.evals.empty()) throw ConfigError("schedule has no eval sets");
  for (const auto& e : schedule.evals) {
    if (e.dialogs.empty()) throw ConfigError("eval set '" + e.name + "' is empty");
  }
  if (!(schedule.dropout >= 0.0 && schedule.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(schedule.clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(schedule.adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (schedule.distractors < 1) throw ConfigError("distractors must be at least 1");
  // Constructing a state validates c, lambda and zeta.
  (void)ConsolidationState(schedule.consolidation, 0);
}

namespace {

ordered_json config_json(const Schedule& s) {
  ordered_json schemes = ordered_json::array();
  for (Scheme x : s.schemes) schemes.push_back(to_string(x));
  ordered_json tasks = ordered_json::array();
  for (const auto& t : s.tasks) tasks.push_back({{"name", t.name}, {"epochs", t.epochs}});
  ordered_json evals = ordered_json::array();
  for (const auto& e : s.evals) evals.push_back(e.name);
  const auto& enc = s.encoder;
  return {{"seed", s.seed},
          {"preset", s.preset},
          {"schemes", schemes},
          {"sizes", s.sizes},
          {"tasks", tasks},
          {"evals", evals},
          {"encoder",
           {enc.char_dim, enc.word_dim, enc.char_hidden, enc.utterance_hidden, enc.state_hidden,
            enc.max_utterance_tokens, enc.embedding_init_bound}},
          {"consolidation",
           {to_string(s.consolidation.mode), s.consolidation.c, s.consolidation.decay, s.consolidation.damping}},
          {"adam", {s.adam.lr, s.adam.beta1, s.adam.beta2, s.adam.eps}},
          {"clip_norm", s.clip_norm},
          {"dropout", s.dropout},
          {"distractors", s.distractors},
          {"reset_adam", s.reset_adam_between_tasks}};
}

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ULL;
  void feed(std::string_view text) {
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;  // record separator
    h *= 1099511628211ULL;
  }
};

}  // namespace

std::string schedule_fingerprint(const Schedule& schedule) {
  Fnv1a f;
  f.feed(config_json(schedule).dump());
  for (const auto& t : schedule.tasks) {
    for (const auto& d : t.dialogs) f.feed(dialog_to_json(d));
    for (const auto& i : t.instances) f.feed(instance_to_json(i));
  }
  for (const auto& e : schedule.evals) {
    for (const auto& d : e.dialogs) f.feed(dialog_to_json(d));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
  return buf;
}

namespace {

std::vector<RankingInstance> task_instances(const TaskSpec& task, std::size_t task_index, std::size_t k,
                                            const SeedStreams& streams) {
  if (!task.instances.empty()) return task.instances;
  const auto inventory = system_inventory(task.dialogs);
  Rng rng(streams.sampling + task_index);
  return build_instances(task.dialogs, inventory, k, rng);
}


Vocab vocab_for(const Schedule& schedule, Scheme scheme) {
  std::vector<std::string> texts;
  const std::size_t first = scheme == Scheme::NoTransfer ? schedule.tasks.size() - 1 : 0;
  for (std::size_t t = first; t < schedule.tasks.size(); ++t) {
    for (const auto& d : schedule.tasks[t].dialogs) {
      for (const auto& turn : d.turns) {
        texts.push_back(turn.user);
        texts.push_back(turn.system);
      }
    }
  }
  return Vocab::build(texts);
}

TrainOptions options_for(const Schedule& schedule, const SeedStreams& streams, std::size_t task_index,
                         std::size_t size) {
  TrainOptions o;
  o.epochs = schedule.tasks[task_index].epochs;
  o.clip_norm = schedule.clip_norm;
  o.dropout = schedule.dropout;
  o.shuffle_seed = streams.shuffle + 101 * task_index + size;
  o.dropout_seed = streams.dropout + 101 * task_index + size;
  return o;
}

struct Snapshot {
  std::vector<double> params;
  AdamState adam;
  ConsolidationState consolidation;
};

class Runner {
 public:
  Runner(const Schedule& schedule, ProgressFn progress, std::map<std::string, std::vector<double>>* params_out)
      : schedule_(schedule), progress_(progress), params_out_(params_out),
        streams_(SeedStreams::from(schedule.seed)) {}

  RunReport run() {
    validate_schedule(schedule_);
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.fingerprint = schedule_fingerprint(schedule_);
    report.seed = schedule_.seed;
    report.preset = schedule_.preset;
    for (Scheme s : schedule_.schemes) report.schemes.emplace_back(to_string(s));
    report.sizes = schedule_.sizes;
    std::sort(report.sizes.begin(), report.sizes.end());
    for (const auto& e : schedule_.evals) {
      report.evals.push_back(e.name);
      inventories_.push_back(system_inventory(e.dialogs));
    }
    for (std::size_t t = 0; t < schedule_.tasks.size(); ++t) {
      instances_.push_back(task_instances(schedule_.tasks[t], t, schedule_.distractors, streams_));
      indexes_.emplace_back(schedule_.tasks[t].dialogs);
    }
    for (Scheme scheme : schedule_.schemes) run_scheme(scheme, report);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  }

 private:
  void note(const std::string& line) const {
    if (progress_ != nullptr) progress_(line);
  }

  void run_scheme(Scheme scheme, RunReport& report) {
    const std::string name(to_string(scheme));
    const std::size_t last = schedule_.tasks.size() - 1;
    ConversationModel model(schedule_.encoder, vocab_for(schedule_, scheme));
    model.initialize(streams_.init);
    const std::size_t n = model.params().size();
    const ConsolidationConfig cc = scheme_consolidation(schedule_, scheme);

    Snapshot base{{model.params().flat_values().begin(), model.params().flat_values().end()},
                  AdamState(schedule_.adam, n), ConsolidationState(cc, n)};

    if (scheme != Scheme::NoTransfer) {
      for (std::size_t t = 0; t < last; ++t) {
        const auto stats = train_task(model, indexes_[t], instances_[t], base.adam, base.consolidation,
                                      options_for(schedule_, streams_, t, 0));
        report.curves.push_back({name, 0, schedule_.tasks[t].name, stats.epoch_mean_loss});
        if (cc.mode == ConsolidationMode::Fisher) {
          estimate_fisher(model, indexes_[t], instances_[t], base.consolidation);
        }
        base.consolidation.on_task_end(model.params().flat_values());
        if (schedule_.reset_adam_between_tasks) base.adam.reset();
        note(name + ": finished task '" + schedule_.tasks[t].name + "'");
      }
      base.params.assign(model.params().flat_values().begin(), model.params().flat_values().end());
    }

    for (std::size_t size : report.sizes) {
      auto values = model.params().flat_values();
      std::copy(base.params.begin(), base.params.end(), values.begin());
      AdamState adam = base.adam;
      ConsolidationState consolidation = base.consolidation;
      const auto subset = few_shot_instances(schedule_.tasks[last], instances_[last], size);
      const auto stats = train_task(model, indexes_[last], subset, adam, consolidation,
                                    options_for(schedule_, streams_, last, size));
      report.curves.push_back({name, size, schedule_.tasks[last].name, stats.epoch_mean_loss});
      for (std::size_t e = 0; e < schedule_.evals.size(); ++e) {
        const EvalResult r = evaluate(model, schedule_.evals[e].dialogs, inventories_[e]);
        report.cells.push_back({name, size, schedule_.evals[e].name, r.correct, r.total, r.accuracy()});
      }
      if (params_out_ != nullptr) {
        (*params_out_)[name + "/" + std::to_string(size)] =
            std::vector<double>(model.params().flat_values().begin(), model.params().flat_values().end());
      }
      if (!schedule_.checkpoint_dir.empty()) {
        std::filesystem::create_directories(schedule_.checkpoint_dir);
        save_checkpoint(schedule_.checkpoint_dir / (name + "_n" + std::to_string(size) + ".ckpt.json"), model,
                        {report.fingerprint, consolidation});
      }
      note(name + ": size " + std::to_string(size) + " done");
    }
  }

  const Schedule& schedule_;
  ProgressFn progress_;
  std::map<std::string, std::vector<double>>* params_out_;
  SeedStreams streams_;
  std::vector<std::vector<std::string>> inventories_;
  std::vector<std::vector<RankingInstance>> instances_;
  std::vector<DialogIndex> indexes_;
};

}  // namespace

RunReport run_schedule(const Schedule& schedule, ProgressFn progress) {
  return Runner(schedule, progress, nullptr).run();
}

std::map<std::string, std::vector<double>> run_schedule_parameters(const Schedule& schedule) {
  std::map<std::string, std::vector<double>> out;
  Runner(schedule, nullptr, &out).run();
  return out;
}

const AccuracyCell* RunReport::find(std::string_view scheme, std::size_t size, std::string_view eval) const {
  for (const auto& c : cells) {
    if (c.scheme == scheme && c.size == size && c.eval == eval) return &c;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Reports

std::string report_to_json(const RunReport& report) {
  ordered_json j;
  j["format"] = "convcl-results";
  j["version"] = 1;
  j["fingerprint"] = report.fingerprint;
  j["seed"] = report.seed;
  j["preset"] = report.preset;
  j["schemes"] = report.schemes;
  j["sizes"] = report.sizes;
  j["evals"] = report.evals;
  ordered_json cells = ordered_json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"scheme", c.scheme},
                     {"size", c.size},
                     {"eval", c.eval},
                     {"correct", c.correct},
                     {"total", c.total},
                     {"accuracy", c.accuracy}});
  }
  j["cells"] = std::move(cells);
  ordered_json curves = ordered_json::array();
  for (const auto& c : report.curves) {
    curves.push_back({{"scheme", c.scheme}, {"size", c.size}, {"task", c.task}, {"epoch_loss", c.epoch_loss}});
  }
  j["curves"] = std::move(curves);
  return j.dump(1) + "\n";
}

RunReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "convcl-results") throw ConfigError("not a convcl results file");
    RunReport r;
    r.fingerprint = j.at("fingerprint");
    r.seed = j.at("seed");
    r.preset = j.at("preset");
    r.schemes = j.at("schemes").get<std::vector<std::string>>();
    r.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    r.evals = j.at("evals").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) {
      r.cells.push_back({c.at("scheme"), c.at("size"), c.at("eval"), c.at("correct"), c.at("total"),
                         c.at("accuracy")});
    }
    for (const auto& c : j.at("curves")) {
      r.curves.push_back({c.at("scheme"), c.at("size"), c.at("task"), c.at("epoch_loss")});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("results file: ") + e.what());
  }
}

std::string render_table(const RunReport& report) {
  std::ostringstream out;
  std::vector<std::size_t> sizes = report.sizes;
  std::sort(sizes.begin(), sizes.end());
  for (const auto& eval : report.evals) {
    out << "Eval: " << eval << "\n";
    out << "Train Size";
    for (const auto& s : report.schemes) out << " | " << std::string(std::max<std::size_t>(6, s.size()) - s.size(), ' ') << s;
    out << "\n";
    for (std::size_t size : sizes) {
      char cell[32];
      std::snprintf(cell, sizeof cell, "%10zu", size);
      out << cell;
      for (const auto& s : report.schemes) {
        const AccuracyCell* c = report.find(s, size, eval);
        const int width = static_cast<int>(std::max<std::size_t>(6, s.size()));
        if (c == nullptr) {
          std::snprintf(cell, sizeof cell, " | %*s", width, "-");
        } else {
          std::snprintf(cell, sizeof cell, " | %*.2f", width, 100.0 * c->accuracy);
        }
        out << cell;
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
  };
  write(dir / "results.json", report_to_json(report));
  std::ostringstream txt;
  txt << "fingerprint: " << report.fingerprint << "\nseed: " << report.seed << "\npreset: " << report.preset
      << "\n";
  char wall[64];
  std::snprintf(wall, sizeof wall, "wall time: %.1f s\n\n", report.wall_seconds);
  txt << wall << render_table(report);
  write(dir / "report.txt", txt.str());
}

// ---------------------------------------------------------------------------
// Config files

namespace {

std::vector<Dialog> dialogs_at(const nlohmann::json& j, const std::filesystem::path& base) {
  return read_dialogs(base / j.get<std::string>());
}

}  // namespace

Schedule schedule_from_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schedule config: ") + e.what());
  }
  try {
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    const std::size_t epochs = j.value("epochs", std::size_t{100});
    Schedule s;
    if (j.contains("synthetic")) {
      const auto& o = j.at("synthetic");
      SyntheticOptions opt;
      opt.seed = seed;
      opt.hh_first_task = o.value("hh_first_task", opt.hh_first_task);
      opt.open_close_dialogs = o.value("open_close_dialogs", opt.open_close_dialogs);
      opt.hh_dialogs = o.value("hh_dialogs", opt.hh_dialogs);
      opt.task_train_dialogs = o.value("task_train_dialogs", opt.task_train_dialogs);
      opt.eval_dialogs = o.value("eval_dialogs", opt.eval_dialogs);
      opt.first_task_generation_seed = o.value("first_task_generation_seed", opt.first_task_generation_seed);
      opt.epochs = o.value("epochs", epochs);
      s = synthetic_schedule(opt);
    } else {
      for (const auto& t : j.at("tasks")) {
        TaskSpec task;
        task.name = t.at("name");
        task.dialogs = dialogs_at(t.at("dialogs"), base_dir);
        if (t.contains("instances")) task.instances = read_instances(base_dir / t.at("instances").get<std::string>());
        task.epochs = t.value("epochs", epochs);
        s.tasks.push_back(std::move(task));
      }
      for (const auto& e : j.at("evals")) {
        s.evals.push_back({e.at("name"), dialogs_at(e.at("dialogs"), base_dir)});
      }
    }
    s.seed = seed;
    s.preset = j.value("preset", std::string("desk"));
    if (s.preset == "desk") {
      s.encoder = EncoderConfig::desk();
    } else if (s.preset == "paper") {
      s.encoder = EncoderConfig::paper();
      s.dropout = 0.4;
    } else {
      throw ConfigError("unknown preset '" + s.preset + "' (expected desk or paper)");
    }
    if (j.contains("schemes")) {
      s.schemes.clear();
      for (const auto& x : j.at("schemes")) s.schemes.push_back(parse_scheme(x.get<std::string>()));
    }
    if (j.contains("sizes")) s.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    s.consolidation.c = j.value("c", s.consolidation.c);
    s.consolidation.decay = j.value("lambda", s.consolidation.decay);
    s.consolidation.damping = j.value("zeta", s.consolidation.damping);
    s.dropout = j.value("dropout", s.dropout);
    s.distractors = j.value("distractors", s.distractors);
    s.clip_norm = j.value("clip_norm", s.clip_norm);
    s.adam.lr = j.value("lr", s.adam.lr);
    s.reset_adam_between_tasks = j.value("reset_adam", s.reset_adam_between_tasks);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schedule config: ") + e.what());
  }
}

}  // namespace convcl
