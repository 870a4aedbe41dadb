#include "convcl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "convcl/errors.hpp"
#include "convcl/ranker.hpp"
#include "convcl/vocab.hpp"

namespace convcl {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::OpenClose: return "open_close";
    case CorpusKind::Task: return "task";
    case CorpusKind::TaskPlus: return "task_plus";
    case CorpusKind::HhLike: return "hh_like";
  }
  return "open_close";
}

CorpusKind parse_corpus_kind(std::string_view text) {
  for (auto kind : {CorpusKind::OpenClose, CorpusKind::Task, CorpusKind::TaskPlus, CorpusKind::HhLike}) {
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError("unknown corpus kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Built-in pools

namespace {

std::vector<Exchange> default_openings() {
  return {
      {{"Hello.", "Hello", "hello!"}, "Hello. What can I help you?"},
      {{"Hi.", "Hi", "hi there"}, "Hi. What can I help you?"},
      {{"Good morning.", "good morning", "Morning!"}, "Good morning. How can I help you today?"},
      {{"Hey.", "hey", "Hey there!"}, "Hey! What can I do for you?"},
      {{"Good evening.", "good evening", "Evening."}, "Good evening. How may I help you?"},
  };
}

std::vector<Exchange> default_closings() {
  return {
      {{"Okay. Thank you.", "Okay thank you.", "ok thanks"}, "Sure thing! Have a great day."},
      {{"Thanks a lot.", "thank you so much", "Thanks!"}, "You're welcome. Happy to help."},
      {{"Bye.", "bye bye", "Goodbye."}, "Goodbye. Have a nice day."},
      {{"That's all, thanks.", "nothing else, thanks", "that is all"}, "Glad I could help. Take care."},
      {{"Great, thanks.", "great thank you", "Perfect, thanks!"}, "No problem. Have a good one."},
  };
}

std::vector<TaskIssue> default_issues() {
  return {
      {{"I forgot my password", "forgot password", "I can't remember my password",
        "I forgot my password and now I have locked my account for 30 days", "need to reset my password",
        "lost my password"},
       "Okay, you don't need to remember your password, we can reset it. Would you like to try that?",
       "SOLUTION: To reset your password, go to xx_url_xx. Was that helpful?"},
      {{"my account is locked", "I got locked out of my account", "account blocked",
        "it says my account has been locked", "my account was suspended"},
       "Your account has been locked for security reasons. We can unlock it after verifying your identity. "
       "Would you like to try that?",
       "SOLUTION: To unlock your account, go to xx_url_xx and verify your identity. Was that helpful?"},
      {{"I don't get the security code", "the verification code never arrives",
        "not receiving the code on my phone", "my phone number changed and I can't get the code"},
       "It sounds like the security code isn't reaching you. We can update your security info. "
       "Would you like to try that?",
       "SOLUTION: To update your security info, go to xx_url_xx. Was that helpful?"},
      {{"how do I change my password", "I want a new password", "change password",
        "I'd like to update my password"},
       "Sure, you can change your password while signed in. Would you like to try that?",
       "SOLUTION: To change your password, sign in and go to xx_url_xx. Was that helpful?"},
      {{"I forgot my username", "what is my user name", "can't remember which email I used",
        "forgot my login name"},
       "Okay, we can help you find your username. Would you like to try that?",
       "SOLUTION: To recover your username, go to xx_url_xx. Was that helpful?"},
  };
}

CorpusSpec with_defaults(CorpusSpec spec) {
  spec.openings = default_openings();
  spec.closings = default_closings();
  spec.issues = default_issues();
  spec.accepts = {"Yes please", "yes", "sure", "ok let's try", "yeah, go ahead", "sounds good"};
  spec.rejects = {"already tried that", "no, that didn't work", "I tried that already and it failed",
                  "no thanks, I want to talk to someone"};
  spec.complications = {"no, that link doesn't work", "it still won't let me in", "that didn't help",
                        "Okay that's also another problem I have. The number I have on file is no longer "
                        "active"};
  spec.escalation = "Let's connect you to a person who can help you.";
  spec.agent_names = {"xx_firstname_xx"};
  return spec;
}

template <typename T>
const T& choose(const std::vector<T>& pool, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return pool[dist(rng)];
}

template <typename T>
void require_pool(const std::vector<T>& pool, const char* name) {
  if (pool.empty()) throw ConfigError(std::string("corpus spec: empty template pool '") + name + "'");
}

std::string dialog_id(std::string_view prefix, std::uint64_t seed, std::size_t i) {
  return std::string(prefix) + "-" + std::to_string(seed) + "-" + std::to_string(i);
}

}  // namespace

CorpusSpec default_corpus_spec(CorpusKind kind, std::size_t dialogs, std::uint64_t seed) {
  CorpusSpec spec;
  spec.kind = kind;
  spec.dialogs = dialogs;
  spec.seed = seed;
  return with_defaults(std::move(spec));
}

// ---------------------------------------------------------------------------
// Spec files

namespace {

std::vector<Exchange> exchanges_from_json(const nlohmann::json& j) {
  std::vector<Exchange> out;
  for (const auto& e : j) out.push_back({e.at("users").get<std::vector<std::string>>(), e.at("system")});
  return out;
}

ordered_json exchanges_to_json(const std::vector<Exchange>& pool) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : pool) arr.push_back({{"users", e.users}, {"system", e.system}});
  return arr;
}

}  // namespace

CorpusSpec parse_corpus_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("corpus spec: ") + e.what());
  }
  try {
    CorpusSpec spec = default_corpus_spec(parse_corpus_kind(j.at("kind").get<std::string>()),
                                          j.value("dialogs", std::size_t{10}), j.value("seed", std::uint64_t{0}));
    if (j.contains("openings")) spec.openings = exchanges_from_json(j["openings"]);
    if (j.contains("closings")) spec.closings = exchanges_from_json(j["closings"]);
    if (j.contains("issues")) {
      spec.issues.clear();
      for (const auto& e : j["issues"]) {
        spec.issues.push_back({e.at("problems").get<std::vector<std::string>>(), e.at("offer"), e.at("solution")});
      }
    }
    if (j.contains("accepts")) spec.accepts = j["accepts"].get<std::vector<std::string>>();
    if (j.contains("rejects")) spec.rejects = j["rejects"].get<std::vector<std::string>>();
    if (j.contains("complications")) spec.complications = j["complications"].get<std::vector<std::string>>();
    if (j.contains("escalation")) spec.escalation = j["escalation"].get<std::string>();
    if (j.contains("agent_names")) spec.agent_names = j["agent_names"].get<std::vector<std::string>>();
    spec.partial_rate = j.value("partial_rate", spec.partial_rate);
    spec.accept_rate = j.value("accept_rate", spec.accept_rate);
    spec.reject_rate = j.value("reject_rate", spec.reject_rate);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("corpus spec: ") + e.what());
  }
}

std::string corpus_spec_to_json(const CorpusSpec& spec) {
  ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["dialogs"] = spec.dialogs;
  j["seed"] = spec.seed;
  j["openings"] = exchanges_to_json(spec.openings);
  j["closings"] = exchanges_to_json(spec.closings);
  ordered_json issues = ordered_json::array();
  for (const auto& i : spec.issues) {
    issues.push_back({{"problems", i.problems}, {"offer", i.offer}, {"solution", i.solution}});
  }
  j["issues"] = issues;
  j["accepts"] = spec.accepts;
  j["rejects"] = spec.rejects;
  j["complications"] = spec.complications;
  j["escalation"] = spec.escalation;
  j["agent_names"] = spec.agent_names;
  j["partial_rate"] = spec.partial_rate;
  j["accept_rate"] = spec.accept_rate;
  j["reject_rate"] = spec.reject_rate;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Generators

std::vector<Dialog> generate_open_close(const CorpusSpec& spec) {
  require_pool(spec.openings, "openings");
  require_pool(spec.closings, "closings");
  for (const auto& e : spec.openings) require_pool(e.users, "openings.users");
  for (const auto& e : spec.closings) require_pool(e.users, "closings.users");
  Rng rng(spec.seed);
  // Cycle through shuffled exchange orders so every system action shows up
  // once the corpus is at least as large as the pools.
  std::vector<std::size_t> open_order(spec.openings.size());
  std::vector<std::size_t> close_order(spec.closings.size());
  std::iota(open_order.begin(), open_order.end(), 0);
  std::iota(close_order.begin(), close_order.end(), 0);
  std::shuffle(open_order.begin(), open_order.end(), rng);
  std::shuffle(close_order.begin(), close_order.end(), rng);
  std::vector<Dialog> out;
  out.reserve(spec.dialogs);
  for (std::size_t i = 0; i < spec.dialogs; ++i) {
    const Exchange& open = spec.openings[open_order[i % open_order.size()]];
    const Exchange& close = spec.closings[close_order[i % close_order.size()]];
    Dialog d;
    d.id = dialog_id("open_close", spec.seed, i);
    d.source = "open_close";
    d.turns.push_back({choose(open.users, rng), open.system});
    d.turns.push_back({choose(close.users, rng), close.system});
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Dialog> generate_task(const CorpusSpec& spec) {
  require_pool(spec.issues, "issues");
  for (const auto& issue : spec.issues) require_pool(issue.problems, "issues.problems");
  require_pool(spec.accepts, "accepts");
  require_pool(spec.rejects, "rejects");
  require_pool(spec.complications, "complications");
  if (spec.escalation.empty()) throw ConfigError("corpus spec: empty escalation action");
  const double total = spec.partial_rate + spec.accept_rate + spec.reject_rate;
  if (spec.partial_rate < 0 || spec.accept_rate < 0 || spec.reject_rate < 0 || total > 1.0) {
    throw ConfigError("corpus spec: dialog-shape rates must be non-negative and sum to at most 1");
  }
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Issues cycle like the open_close exchanges: any run of issues.size()
  // consecutive dialogs covers every issue once.
  std::vector<std::size_t> issue_order(spec.issues.size());
  std::iota(issue_order.begin(), issue_order.end(), 0);
  std::shuffle(issue_order.begin(), issue_order.end(), rng);
  std::vector<Dialog> out;
  out.reserve(spec.dialogs);
  for (std::size_t i = 0; i < spec.dialogs; ++i) {
    const TaskIssue& issue = spec.issues[issue_order[i % issue_order.size()]];
    Dialog d;
    d.id = dialog_id("task", spec.seed, i);
    d.source = "task";
    d.turns.push_back({choose(issue.problems, rng), issue.offer});
    const double shape = unit(rng);
    if (shape < spec.partial_rate) {
      d.source = "task/partial";
    } else if (shape < spec.partial_rate + spec.accept_rate) {
      d.turns.push_back({choose(spec.accepts, rng), issue.solution});
    } else if (shape < total) {
      d.turns.push_back({choose(spec.rejects, rng), spec.escalation});
    } else {
      d.turns.push_back({choose(spec.accepts, rng), issue.solution});
      d.turns.push_back({choose(spec.complications, rng), spec.escalation});
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Dialog> generate_hh_like(const CorpusSpec& spec) {
  require_pool(spec.agent_names, "agent_names");
  static const std::vector<std::string> greetings = {"hello", "hi", "hello i am having trouble accessing my laptop",
                                                     "hi there", "good afternoon"};
  static const std::vector<std::string> problems = {
      "i forgot the password i changed the pw on my account, but the computer is still not able to be accessed",
      "i can't sign in to my account because i forgot my password and the reset email never came",
      "my account got locked after too many attempts and now i can't get into my email",
      "i need to reset my password but it keeps asking for a code i never receive",
      "i changed my phone number and now i can't verify my account to reset the password"};
  static const std::vector<Turn> diagnosis = {
      {"windows 10", "may i know what is the error message you received upon trying to unlock your computer?"},
      {"the password is not working i forgot the pw, i tried to reset the pw from the account",
       "is it a local account or microsoft account?"},
      {"i am not sure i thought it was a microsoft account but the pw didnt change",
       "can you send me the email so that i can check if it is microsoft account?"},
      {"xx_email_xx though i think i may have created one by accident", "let me check that for you. one moment please."},
      {"okay", "have you tried resetting the password from another device?"},
      {"yes but it did not work", "did you receive a security code on your phone or alternate email?"},
      {"no i did not get any code", "could you please check your spam or junk folder as well?"},
      {"nothing there either", "thank you for checking. may i know when you last signed in successfully?"},
      {"maybe two weeks ago", "alright. have you made any changes to your security info recently?"},
      {"i updated my phone number last month", "i see, that explains why the code is not reaching you."}};
  static const std::vector<Turn> off_task = {
      {"how is your day going?", "i'm doing great, thanks for asking! let's get this sorted out for you."},
      {"sorry, my dog is barking", "no worries at all, take your time."},
      {"is it raining there too?", "haha, it's sunny here. now, back to your issue."},
      {"sorry i had to step away for a second", "that's alright, i'm still here to help you."}};
  Rng rng(spec.seed);
  std::uniform_int_distribution<std::size_t> diag_count(4, 6);
  std::uniform_int_distribution<std::size_t> off_count(0, 2);
  std::bernoulli_distribution solved(0.5);
  std::vector<Dialog> out;
  out.reserve(spec.dialogs);
  for (std::size_t i = 0; i < spec.dialogs; ++i) {
    Dialog d;
    d.id = dialog_id("hh_like", spec.seed, i);
    d.source = "hh_like";
    const std::string& agent = choose(spec.agent_names, rng);
    d.turns.push_back({choose(greetings, rng),
                       "hi, thanks for visiting answer desk! i'm " + agent + ". how may i help you today?"});
    d.turns.push_back({choose(problems, rng),
                       "oh that's bad, that might be very important to you but no worries i will help you out with "
                       "your issue. to start with may i have your complete name please?"});
    d.turns.push_back({"my name is xx_firstname_xx xx_lastname_xx",
                       "thank you. may i also know your email address and phone number please?"});
    d.turns.push_back({"my email, xx_email_xx, xx_phonenumber_xx",
                       "thank you for the information. what is your current operating system?"});
    std::vector<std::size_t> order(diagnosis.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_diag = diag_count(rng);
    const std::size_t n_off = off_count(rng);
    std::vector<Turn> middle;
    for (std::size_t k = 0; k < n_diag; ++k) middle.push_back(diagnosis[order[k]]);
    for (std::size_t k = 0; k < n_off; ++k) {
      const Turn& t = choose(off_task, rng);
      std::uniform_int_distribution<std::size_t> pos(0, middle.size());
      middle.insert(middle.begin() + static_cast<std::ptrdiff_t>(pos(rng)), t);
    }
    d.turns.insert(d.turns.end(), middle.begin(), middle.end());
    if (solved(rng)) {
      d.turns.push_back({"okay i'll try that", "please go to xx_url_xx and follow the steps to reset your password."});
      d.turns.push_back({"it worked! i'm in now", "that's great to hear! is there anything else i can help you with?"});
    } else {
      d.turns.push_back({"that still doesn't work",
                         "since we're unable to know what exactly happening to your computer. i will provide you our "
                         "technical phone support so that you will be well instructed. would that be okay with you?"});
      d.turns.push_back({"fine", "one moment please."});
    }
    d.turns.push_back({"no that's all, thanks", "thank you for contacting answer desk. have a great day!"});
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Dialog> generate(const CorpusSpec& spec) {
  switch (spec.kind) {
    case CorpusKind::OpenClose: return generate_open_close(spec);
    case CorpusKind::Task: return generate_task(spec);
    case CorpusKind::HhLike: return generate_hh_like(spec);
    case CorpusKind::TaskPlus: {
      CorpusSpec task = spec;
      task.kind = CorpusKind::Task;
      CorpusSpec open_close = spec;
      open_close.kind = CorpusKind::OpenClose;
      open_close.dialogs = 10;
      open_close.seed = spec.seed + 1;
      Rng rng(spec.seed + 2);
      auto plus = splice_plus(generate_task(task), generate_open_close(open_close), rng);
      return plus;
    }
  }
  throw ConfigError("unhandled corpus kind");
}

std::vector<Dialog> splice_plus(std::span<const Dialog> task_dialogs, std::span<const Dialog> open_close,
                                Rng& rng) {
  if (task_dialogs.empty() || open_close.empty()) throw DomainError("splice_plus needs non-empty corpora");
  std::uniform_int_distribution<std::size_t> pick_dialog(0, open_close.size() - 1);
  std::vector<Dialog> out;
  out.reserve(task_dialogs.size());
  for (const Dialog& task : task_dialogs) {
    const Dialog& opener = open_close[pick_dialog(rng)];
    const Dialog& closer = open_close[pick_dialog(rng)];
    if (opener.turns.empty() || closer.turns.empty()) throw DomainError("open_close dialog without turns");
    Dialog d;
    d.id = task.id + "+";
    d.source = task.source + "+";
    d.turns.reserve(task.turns.size() + 2);
    d.turns.push_back(opener.turns.front());
    d.turns.insert(d.turns.end(), task.turns.begin(), task.turns.end());
    d.turns.push_back(closer.turns.back());
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::string> system_inventory(std::span<const Dialog> dialogs) {
  std::set<std::string> actions;
  for (const auto& d : dialogs) {
    for (const auto& t : d.turns) actions.insert(t.system);
  }
  return {actions.begin(), actions.end()};
}

std::vector<RankingInstance> build_instances(std::span<const Dialog> dialogs,
                                             std::span<const std::string> inventory, std::size_t k,
                                             Rng& rng) {
  if (inventory.size() <= k) {
    throw SamplingError("build_instances: inventory of " + std::to_string(inventory.size()) +
                        " actions cannot supply " + std::to_string(k) + " distractors plus the truth");
  }
  std::vector<RankingInstance> out;
  for (const auto& d : dialogs) {
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      RankingInstance inst;
      inst.dialog_id = d.id;
      inst.turn = t + 1;
      inst.truth = d.turns[t].system;
      inst.distractors = negative_sample(inventory, inst.truth, k, rng);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

CorpusStats compute_stats(std::span<const Dialog> dialogs) {
  if (dialogs.empty()) throw DomainError("compute_stats on an empty corpus");
  std::size_t turns = 0;
  std::size_t user_tokens = 0;
  std::size_t system_tokens = 0;
  for (const auto& d : dialogs) {
    turns += d.turns.size();
    for (const auto& t : d.turns) {
      user_tokens += tokenize(t.user).size();
      system_tokens += tokenize(t.system).size();
    }
  }
  CorpusStats s;
  s.dialogs = dialogs.size();
  s.avg_dialog_len = static_cast<double>(turns) / static_cast<double>(dialogs.size());
  if (turns > 0) {
    s.avg_user_len = static_cast<double>(user_tokens) / static_cast<double>(turns);
    s.avg_system_len = static_cast<double>(system_tokens) / static_cast<double>(turns);
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON Lines

std::string dialog_to_json(const Dialog& dialog) {
  ordered_json j;
  j["id"] = dialog.id;
  ordered_json turns = ordered_json::array();
  for (const auto& t : dialog.turns) turns.push_back(ordered_json::array({t.user, t.system}));
  j["turns"] = std::move(turns);
  j["source"] = dialog.source;
  return j.dump();
}

Dialog dialog_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Dialog d;
    d.id = j.at("id").get<std::string>();
    d.source = j.value("source", std::string{});
    for (const auto& t : j.at("turns")) {
      if (!t.is_array() || t.size() != 2) throw ConfigError("dialog '" + d.id + "': turn is not a [user, system] pair");
      d.turns.push_back({t[0].get<std::string>(), t[1].get<std::string>()});
    }
    if (d.turns.empty()) throw ConfigError("dialog '" + d.id + "' has no turns");
    for (const auto& t : d.turns) {
      if (t.system.empty()) throw ConfigError("dialog '" + d.id + "' has an empty system action");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dialog record: ") + e.what());
  }
}

std::string instance_to_json(const RankingInstance& instance) {
  ordered_json j;
  j["dialog_id"] = instance.dialog_id;
  j["turn"] = instance.turn;
  j["truth"] = instance.truth;
  j["distractors"] = instance.distractors;
  return j.dump();
}

RankingInstance instance_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    RankingInstance inst;
    inst.dialog_id = j.at("dialog_id").get<std::string>();
    inst.turn = j.at("turn").get<std::size_t>();
    inst.truth = j.at("truth").get<std::string>();
    inst.distractors = j.at("distractors").get<std::vector<std::string>>();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("instance record: ") + e.what());
  }
}

namespace {

template <typename T, typename Fn>
void write_lines(const std::filesystem::path& path, std::span<const T> items, Fn to_line) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& item : items) out << to_line(item) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename Fn>
auto read_lines(const std::filesystem::path& path, Fn from_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<decltype(from_line(std::string_view{}))> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(from_line(line));
  }
  return out;
}

}  // namespace

void write_dialogs(const std::filesystem::path& path, std::span<const Dialog> dialogs) {
  write_lines(path, dialogs, dialog_to_json);
}

std::vector<Dialog> read_dialogs(const std::filesystem::path& path) { return read_lines(path, dialog_from_json); }

void write_instances(const std::filesystem::path& path, std::span<const RankingInstance> instances) {
  write_lines(path, instances, instance_to_json);
}

std::vector<RankingInstance> read_instances(const std::filesystem::path& path) {
  return read_lines(path, instance_from_json);
}

}  // namespace convcl
