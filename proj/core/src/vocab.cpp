#include "convcl/vocab.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "convcl/errors.hpp"

namespace convcl {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0 || c == '_'; }

constexpr std::string_view kHeader = "#convcl-vocab 1";

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) != 0) {
      flush();
    } else {
      flush();
      tokens.emplace_back(1, raw);
    }
  }
  flush();
  return tokens;
}

Vocab::Vocab() {
  words_ = {std::string(kPadToken), std::string(kUnknownToken), std::string(kStartToken)};
  chars_ = {0, 0};
  rebuild_index();
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  std::set<unsigned char> chars;
  for (const auto& text : texts) {
    for (auto& token : tokenize(text)) {
      for (char c : token) chars.insert(static_cast<unsigned char>(c));
      words.insert(std::move(token));
    }
  }
  Vocab v;
  for (const auto& w : words) v.words_.push_back(w);
  for (unsigned char c : chars) v.chars_.push_back(c);
  v.rebuild_index();
  return v;
}

void Vocab::rebuild_index() {
  word_lookup_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) word_lookup_.emplace(words_[i], i);
  char_lookup_.assign(256, kUnknown);
  for (std::size_t i = 2; i < chars_.size(); ++i) char_lookup_[chars_[i]] = i;
}

std::size_t Vocab::word_index(std::string_view word) const {
  auto it = word_lookup_.find(word);
  return it == word_lookup_.end() ? kUnknown : it->second;
}

std::size_t Vocab::char_index(unsigned char c) const { return char_lookup_[c]; }

std::string Vocab::dump() const {
  std::ostringstream out;
  out << kHeader << "\n[chars]\n";
  for (std::size_t i = 2; i < chars_.size(); ++i) {
    char buf[4];
    std::snprintf(buf, sizeof buf, "%02x", chars_[i]);
    out << buf << "\n";
  }
  out << "[words]\n";
  for (std::size_t i = 3; i < words_.size(); ++i) out << words_[i] << "\n";
  return out.str();
}

Vocab Vocab::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw ConfigError("vocab: missing header line");
  Vocab v;
  enum class Section { None, Chars, Words } section = Section::None;
  while (std::getline(in, line)) {
    if (line == "[chars]") {
      section = Section::Chars;
    } else if (line == "[words]") {
      section = Section::Words;
    } else if (line.empty()) {
      continue;
    } else if (section == Section::Chars) {
      v.chars_.push_back(static_cast<unsigned char>(std::stoul(line, nullptr, 16)));
    } else if (section == Section::Words) {
      v.words_.push_back(line);
    } else {
      throw ConfigError("vocab: entry outside a section: " + line);
    }
  }
  v.rebuild_index();
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary to " + path.string());
  out << dump();
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary from " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace convcl
