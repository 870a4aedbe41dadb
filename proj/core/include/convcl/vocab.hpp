#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace convcl {

/// Lowercases, splits on whitespace, and emits each punctuation character
/// as its own token. Letters, digits, '_' and non-ASCII bytes form words, so
/// anonymization placeholders such as xx_url_xx stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Character and word indices built from training text. Index 0 is padding
/// and 1 is unknown in both tables; word index 2 is the start-of-dialog
/// action token. Remaining entries are sorted.
class Vocab {
 public:
  static constexpr std::size_t kPadding = 0;
  static constexpr std::size_t kUnknown = 1;
  static constexpr std::size_t kStart = 2;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnknownToken = "<unk>";
  static constexpr std::string_view kStartToken = "<sod>";

  Vocab();

  /// Builds the index from every token of every text.
  static Vocab build(const std::vector<std::string>& texts);

  [[nodiscard]] std::size_t num_words() const { return words_.size(); }
  [[nodiscard]] std::size_t num_chars() const { return chars_.size(); }

  [[nodiscard]] std::size_t word_index(std::string_view word) const;
  [[nodiscard]] std::size_t char_index(unsigned char c) const;
  [[nodiscard]] const std::string& word(std::size_t index) const { return words_.at(index); }
  [[nodiscard]] const std::vector<std::string>& words() const { return words_; }
  [[nodiscard]] const std::vector<unsigned char>& chars() const { return chars_; }
  [[nodiscard]] static bool is_reserved_word(std::size_t index) { return index <= kStart; }

  /// Sorted token list: a header line, "[chars]" then one hex byte per line,
  /// "[words]" then one word per line. Reserved entries are implicit.
  [[nodiscard]] std::string dump() const;
  static Vocab parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.words_ == b.words_ && a.chars_ == b.chars_;
  }

 private:
  void rebuild_index();

  std::vector<std::string> words_;
  std::vector<unsigned char> chars_;  // entries 0 and 1 are placeholders
  std::map<std::string, std::size_t, std::less<>> word_lookup_;
  std::vector<std::size_t> char_lookup_;  // byte -> index
};

}  // namespace convcl
