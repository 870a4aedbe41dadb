#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace convcl {

struct Turn {
  std::string user;
  std::string system;

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// A dialog is at least one (user utterance, system action) exchange.
struct Dialog {
  std::string id;
  std::vector<Turn> turns;
  std::string source;

  [[nodiscard]] std::size_t length() const { return turns.size(); }
  friend bool operator==(const Dialog&, const Dialog&) = default;
};

/// One training or evaluation decision: pick `truth` for turn `turn`
/// (1-based) of dialog `dialog_id` against the distractors.
struct RankingInstance {
  std::string dialog_id;
  std::size_t turn = 1;
  std::string truth;
  std::vector<std::string> distractors;

  friend bool operator==(const RankingInstance&, const RankingInstance&) = default;
};

}  // namespace convcl
