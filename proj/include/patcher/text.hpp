#pragma once

// Word-level text handling shared by every module: the POS lexicon, the
// tokenizer, token rendering and English article normalization.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "patcher/error.hpp"

namespace patcher {

enum class PartOfSpeech { Noun, Adj, Det, Conj, Other };

inline std::optional<PartOfSpeech> parse_pos(std::string_view s) {
  if (s == "NOUN") return PartOfSpeech::Noun;
  if (s == "ADJ") return PartOfSpeech::Adj;
  if (s == "DET") return PartOfSpeech::Det;
  if (s == "CONJ") return PartOfSpeech::Conj;
  if (s == "OTHER") return PartOfSpeech::Other;
  return std::nullopt;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// 64-bit FNV-1a. Used wherever a hash must be stable across platforms
// (std::hash is not).
inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Closed-class POS lexicon: one `lemma<TAB>pos` entry per line.
class Lexicon {
 public:
  Lexicon() = default;

  static Lexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read lexicon " + path);
    Lexicon lex;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error(ErrorCode::MalformedRecord,
                    path + ":" + std::to_string(lineno) + ": expected lemma<TAB>pos");
      auto pos = parse_pos(trim(line.substr(tab + 1)));
      if (!pos)
        throw Error(ErrorCode::MalformedRecord,
                    path + ":" + std::to_string(lineno) + ": unknown pos");
      lex.add(line.substr(0, tab), *pos);
    }
    return lex;
  }

  void add(std::string_view lemma, PartOfSpeech pos) {
    entries_[to_lower(lemma)] = pos;
  }

  std::optional<PartOfSpeech> lookup(std::string_view lemma) const {
    auto it = entries_.find(std::string(lemma));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view lemma) const {
    return entries_.count(std::string(lemma)) != 0;
  }

  size_t size() const { return entries_.size(); }

  // Lowercase; strip a plural "s" only when the singular is a known entry
  // and the surface itself is not.
  std::string lemmatize(std::string_view surface) const {
    std::string lower = to_lower(surface);
    if (lower.size() > 2 && lower.back() == 's' && !contains(lower)) {
      std::string singular = lower.substr(0, lower.size() - 1);
      if (contains(singular)) return singular;
    }
    return lower;
  }

 private:
  std::unordered_map<std::string, PartOfSpeech> entries_;
};

inline bool is_punct_char(char c) {
  switch (c) {
    case ',': case '.': case ';': case ':': case '!': case '?':
    case '"': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

inline bool is_punct_token(std::string_view t) {
  return t.size() == 1 && is_punct_char(t[0]);
}

/// Whitespace split, then peel leading/trailing punctuation into their own
/// tokens. Inner hyphens and apostrophes stay inside the word.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string chunk;
  while (in >> chunk) {
    size_t b = 0, e = chunk.size();
    std::vector<std::string> tail;
    while (b < e && is_punct_char(chunk[b])) out.emplace_back(1, chunk[b++]);
    while (e > b && is_punct_char(chunk[e - 1])) tail.emplace_back(1, chunk[--e]);
    if (e > b) out.push_back(chunk.substr(b, e - b));
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

/// Inverse of split_words for canonical text: single spaces, no space before
/// closing punctuation or after an opening bracket.
inline std::string render_words(const std::vector<std::string>& words) {
  std::string out;
  bool glue_next = false;
  for (const auto& w : words) {
    bool closing = w.size() == 1 && std::string_view(",.;:!?)]").find(w[0]) != std::string_view::npos;
    if (!out.empty() && !closing && !glue_next) out.push_back(' ');
    out += w;
    glue_next = (w == "(" || w == "[");
  }
  return out;
}

// Heuristic "an" detection on the following word's spelling.
inline bool starts_with_vowel_sound(std::string_view word) {
  std::string w = to_lower(word);
  if (w.empty()) return false;
  for (std::string_view silent_h : {"hour", "honest", "honor", "honour", "heir"})
    if (w.rfind(silent_h, 0) == 0) return true;
  for (std::string_view yoo : {"uni", "use", "usu", "uter", "euro", "eu", "one", "once", "ewe", "ubiq"})
    if (w.rfind(yoo, 0) == 0) return false;
  return std::string_view("aeiou").find(w[0]) != std::string_view::npos;
}

/// The article ("a"/"an") that agrees with `next_word`, preserving the
/// capitalization of `article`.
inline std::string agree_article(std::string_view article, std::string_view next_word) {
  std::string lower = to_lower(article);
  if (lower != "a" && lower != "an") return std::string(article);
  std::string fixed = starts_with_vowel_sound(next_word) ? "an" : "a";
  if (!article.empty() && std::isupper(static_cast<unsigned char>(article[0])))
    fixed[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(fixed[0])));
  return fixed;
}

}  // namespace patcher
