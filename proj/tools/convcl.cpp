#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "convcl/consolidation.hpp"
#include "convcl/corpus.hpp"
#include "convcl/errors.hpp"
#include "convcl/gradcheck.hpp"
#include "convcl/harness.hpp"
#include "convcl/model.hpp"

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw convcl::IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "1..5", "1,3,5" or "4".
std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const std::size_t lo = std::stoul(text.substr(0, dots));
    const std::size_t hi = std::stoul(text.substr(dots + 2));
    if (lo < 1 || hi < lo) throw convcl::ConfigError("bad size range '" + text + "'");
    for (std::size_t n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  if (out.empty()) throw convcl::ConfigError("empty size list");
  return out;
}

std::string patch_config(const std::string& text, const std::uint64_t* seed, std::size_t epochs) {
  auto j = nlohmann::json::parse(text);
  if (seed != nullptr) j["seed"] = *seed;
  if (epochs > 0) j["epochs"] = epochs;
  return j.dump();
}

void print_progress(const std::string& line) { std::cerr << line << std::endl; }

struct GenerateArgs {
  std::string config;
  std::string kind = "open_close";
  std::size_t dialogs = 10;
  std::uint64_t seed = 0;
  std::size_t distractors = 9;
  std::string out = "corpus.jsonl";
  std::string instances;
};

int run_generate(const GenerateArgs& a) {
  convcl::CorpusSpec spec = a.config.empty()
                                ? convcl::default_corpus_spec(convcl::parse_corpus_kind(a.kind), a.dialogs, a.seed)
                                : convcl::parse_corpus_spec(read_file(a.config));
  const auto dialogs = convcl::generate(spec);
  convcl::write_dialogs(a.out, dialogs);
  const auto stats = convcl::compute_stats(dialogs);
  std::printf("%zu dialogs -> %s (avg turns %.2f, user tokens %.2f, system tokens %.2f)\n", stats.dialogs,
              a.out.c_str(), stats.avg_dialog_len, stats.avg_user_len, stats.avg_system_len);
  if (!a.instances.empty()) {
    convcl::Rng rng(spec.seed + 3000);
    const auto inventory = convcl::system_inventory(dialogs);
    const auto instances = convcl::build_instances(dialogs, inventory, a.distractors, rng);
    convcl::write_instances(a.instances, instances);
    std::printf("%zu instances -> %s\n", instances.size(), a.instances.c_str());
  }
  return 0;
}

struct TrainArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::vector<std::string> schemes;
  std::string sizes;
  double lambda = -1.0;
  double zeta = -1.0;
  double c = -1.0;
  std::string preset;
  std::string out = "run";
  std::size_t epochs = 0;
  bool checkpoints = false;
  bool seed_given = false;
};

int run_train(const TrainArgs& a) {
  convcl::Schedule schedule;
  if (a.config.empty()) {
    convcl::SyntheticOptions options;
    options.seed = a.seed;
    if (a.epochs > 0) options.epochs = a.epochs;
    schedule = convcl::synthetic_schedule(options);
  } else {
    const std::filesystem::path path(a.config);
    std::string text = read_file(path);
    if (a.seed_given || a.epochs > 0) {
      // Command-line seed and epochs take precedence over the file.
      text = patch_config(text, a.seed_given ? &a.seed : nullptr, a.epochs);
    }
    schedule = convcl::schedule_from_config(text, path.parent_path());
  }
  if (!a.schemes.empty()) {
    schedule.schemes.clear();
    for (const auto& s : a.schemes) schedule.schemes.push_back(convcl::parse_scheme(s));
  }
  if (!a.sizes.empty()) schedule.sizes = parse_sizes(a.sizes);
  if (a.lambda >= 0.0) schedule.consolidation.decay = a.lambda;
  if (a.zeta >= 0.0) schedule.consolidation.damping = a.zeta;
  if (a.c >= 0.0) schedule.consolidation.c = a.c;
  if (a.preset == "paper") {
    schedule.preset = "paper";
    schedule.encoder = convcl::EncoderConfig::paper();
    schedule.dropout = 0.4;
  } else if (a.preset == "desk") {
    schedule.preset = "desk";
    schedule.encoder = convcl::EncoderConfig::desk();
  }
  if (a.checkpoints) schedule.checkpoint_dir = std::filesystem::path(a.out) / "checkpoints";

  const auto report = convcl::run_schedule(schedule, print_progress);
  convcl::emit_report(report, a.out);
  std::printf("fingerprint %s, %.1f s\n\n%s", report.fingerprint.c_str(), report.wall_seconds,
              convcl::render_table(report).c_str());
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& dialogs_path, bool export_path_given,
             const std::string& importance_out) {
  auto loaded = convcl::load_checkpoint(checkpoint);
  const auto dialogs = convcl::read_dialogs(dialogs_path);
  const auto inventory = convcl::system_inventory(dialogs);
  const auto r = convcl::evaluate(*loaded.model, dialogs, inventory);
  std::printf("accuracy %.4f (%zu/%zu turns, %zu actions)\n", r.accuracy(), r.correct, r.total, inventory.size());
  if (export_path_given) {
    convcl::export_importance(loaded.meta.consolidation, loaded.model->params(), importance_out);
    std::printf("importance -> %s\n", importance_out.c_str());
  }
  return 0;
}

int run_report(const std::string& results) {
  const auto report = convcl::report_from_json(read_file(results));
  std::printf("fingerprint: %s\nseed: %llu\n\n%s", report.fingerprint.c_str(),
              static_cast<unsigned long long>(report.seed), convcl::render_table(report).c_str());
  return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t trials) {
  const auto results = convcl::run_gradient_suite(seed, trials);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-24s trials %4zu  max rel err %.3e  %s\n", r.name.c_str(), r.trials, r.max_rel_error,
                r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual-learning dialog agents: corpora, training schedules, reports"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic dialog corpus");
  generate->add_option("--config", gen.config, "Corpus spec JSON (overrides --kind/--dialogs/--seed)");
  generate->add_option("--kind", gen.kind, "open_close, task, task_plus or hh_like");
  generate->add_option("--dialogs", gen.dialogs, "Number of dialogs");
  generate->add_option("--seed", gen.seed, "Generation seed");
  generate->add_option("--out", gen.out, "Output JSONL file");
  generate->add_option("--instances", gen.instances, "Also write ranking instances here");
  generate->add_option("--distractors", gen.distractors, "Distractors per instance");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Run a training schedule and write a report");
  train->add_option("--config", tr.config, "Schedule JSON; the synthetic two-task schedule when omitted");
  auto* seed_opt = train->add_option("--seed", tr.seed, "Run seed");
  train->add_option("--scheme", tr.schemes, "nt, wt, aewc or ewc (repeatable)")
      ->check(CLI::IsMember({"nt", "wt", "aewc", "ewc"}, CLI::ignore_case));
  train->add_option("--sizes", tr.sizes, "Few-shot sizes, e.g. 1..5 or 1,3,5");
  train->add_option("--lambda", tr.lambda, "Decay of the running importance sums")->check(CLI::Range(0.0, 1.0));
  train->add_option("--zeta", tr.zeta, "Damping of the importance denominator")->check(CLI::PositiveNumber);
  train->add_option("--c", tr.c, "Weight of the consolidation penalty")->check(CLI::NonNegativeNumber);
  train->add_option("--preset", tr.preset, "Model size")->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--epochs", tr.epochs, "Epochs per task");
  train->add_option("--out", tr.out, "Output directory");
  train->add_flag("--checkpoints", tr.checkpoints, "Save a checkpoint per scheme and size");

  std::string checkpoint, dialogs, importance;
  auto* eval = app.add_subcommand("eval", "Score a saved model on a dialog file");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--dialogs", dialogs, "Dialog JSONL file")->required();
  auto* importance_opt = eval->add_option("--export-importance", importance, "Write per-parameter importance TSV");

  std::string results;
  auto* report = app.add_subcommand("report", "Render the accuracy table of a results file");
  report->add_option("--results", results, "results.json")->required();

  std::uint64_t gc_seed = 7;
  std::size_t gc_trials = 100;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gradcheck->add_option("--seed", gc_seed, "Random seed");
  gradcheck->add_option("--trials", gc_trials, "Trials per operation");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*generate) return run_generate(gen);
    if (*train) {
      tr.seed_given = seed_opt->count() > 0;
      return run_train(tr);
    }
    if (*eval) return run_eval(checkpoint, dialogs, importance_opt->count() > 0, importance);
    if (*report) return run_report(results);
    if (*gradcheck) return run_gradcheck(gc_seed, gc_trials);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
