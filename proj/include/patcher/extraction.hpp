#pragma once

// Object-entity extraction: a deterministic noun-phrase chunker over the
// bundled POS lexicon, plus a pluggable remote-parser mode.

#include <memory>
#include <string>
#include <vector>

#include "patcher/domain.hpp"
#include "patcher/text.hpp"

namespace patcher {

enum class ExtractionMode { BuiltinChunker, RemoteParser };

struct ExtractionConfig {
  ExtractionMode mode = ExtractionMode::BuiltinChunker;
  std::string lexicon_path;
};

/// External dependency parser. Returns noun-phrase entities over the
/// prompt's own tokenization.
class ParserCapability {
 public:
  virtual ~ParserCapability() = default;
  virtual std::vector<ObjectEntity> parse(const Prompt& p) = 0;
};

namespace detail {

enum class Tag { Noun, Adj, Det, Conj, Other };

inline bool looks_verbal(std::string_view w) {
  auto ends = [&](std::string_view suf) {
    return w.size() > suf.size() + 2 && w.substr(w.size() - suf.size()) == suf;
  };
  return ends("ing") || ends("ed") || ends("ly");
}

inline std::vector<Tag> tag_tokens(const Prompt& p, const Lexicon& lex) {
  const size_t n = p.tokens.size();
  std::vector<std::optional<PartOfSpeech>> known(n);
  for (size_t i = 0; i < n; ++i) {
    const Token& t = p.tokens[i];
    if (is_punct_token(t.surface)) {
      known[i] = PartOfSpeech::Other;
      continue;
    }
    known[i] = lex.lookup(t.lemma);
    if (!known[i]) known[i] = lex.lookup(to_lower(t.surface));
  }
  auto nounish = [&](size_t j) {
    if (j >= n) return false;
    if (known[j]) return *known[j] == PartOfSpeech::Noun;
    return !looks_verbal(to_lower(p.tokens[j].surface));
  };
  std::vector<Tag> tags(n, Tag::Other);
  for (size_t i = 0; i < n; ++i) {
    if (known[i]) {
      switch (*known[i]) {
        case PartOfSpeech::Noun: tags[i] = Tag::Noun; break;
        case PartOfSpeech::Adj: tags[i] = Tag::Adj; break;
        case PartOfSpeech::Det: tags[i] = Tag::Det; break;
        case PartOfSpeech::Conj: tags[i] = Tag::Conj; break;
        case PartOfSpeech::Other: tags[i] = Tag::Other; break;
      }
      continue;
    }
    // Unknown word: a modifier when a noun follows, otherwise a noun unless
    // it looks like a verb form.
    if (nounish(i + 1))
      tags[i] = Tag::Adj;
    else
      tags[i] = looks_verbal(to_lower(p.tokens[i].surface)) ? Tag::Other : Tag::Noun;
  }
  return tags;
}

struct Chunk {
  Span span;
  // Trailing noun run of the leading ADJ* NOUN+ group.
  Span key;
};

// Parses ADJ* NOUN+ starting at i. Returns the span, or nullopt.
inline std::optional<Chunk> noun_group(const std::vector<Tag>& tags, size_t i) {
  size_t j = i;
  while (j < tags.size() && tags[j] == Tag::Adj) ++j;
  size_t noun_start = j;
  while (j < tags.size() && tags[j] == Tag::Noun) ++j;
  if (j == noun_start) return std::nullopt;
  return Chunk{{i, j - 1}, {noun_start, j - 1}};
}

inline std::vector<Chunk> chunk(const Prompt& p, const std::vector<Tag>& tags) {
  std::vector<Chunk> out;
  const size_t n = tags.size();
  size_t i = 0;
  while (i < n) {
    if (tags[i] != Tag::Adj && tags[i] != Tag::Noun) {
      ++i;
      continue;
    }
    auto group = noun_group(tags, i);
    if (!group) {
      // Adjectives without a noun (predicative use) are skipped.
      while (i < n && tags[i] == Tag::Adj) ++i;
      continue;
    }
    Chunk c = *group;
    // "X with Y (and Z)" attaches to X.
    size_t k = c.span.end + 1;
    if (k < n && p.tokens[k].lemma == "with") {
      size_t m = k + 1;
      if (m < n && tags[m] == Tag::Det) ++m;
      if (auto pp = noun_group(tags, m)) {
        c.span.end = pp->span.end;
        while (c.span.end + 2 < n && tags[c.span.end + 1] == Tag::Conj) {
          auto more = noun_group(tags, c.span.end + 2);
          if (!more) break;
          c.span.end = more->span.end;
        }
      }
    }
    out.push_back(c);
    i = c.span.end + 1;
  }
  return out;
}

inline std::string span_text(const Prompt& p, Span s) {
  std::vector<std::string> words;
  for (size_t i = s.start; i <= s.end; ++i) words.push_back(p.tokens[i].surface);
  return render_words(words);
}

}  // namespace detail

class Extractor {
 public:
  explicit Extractor(std::shared_ptr<const Lexicon> lexicon,
                     ExtractionMode mode = ExtractionMode::BuiltinChunker,
                     std::shared_ptr<ParserCapability> remote = nullptr)
      : lexicon_(std::move(lexicon)), mode_(mode), remote_(std::move(remote)) {
    if (!lexicon_) throw Error(ErrorCode::InvalidArgument, "extractor needs a lexicon");
  }

  static Extractor from_config(const ExtractionConfig& cfg,
                               std::shared_ptr<ParserCapability> remote = nullptr) {
    auto lex = std::make_shared<const Lexicon>(Lexicon::load(cfg.lexicon_path));
    return Extractor(std::move(lex), cfg.mode, std::move(remote));
  }

  const Lexicon& lexicon() const { return *lexicon_; }
  ExtractionMode mode() const { return mode_; }

  Prompt prompt(std::string id, std::string text) const {
    return make_prompt(std::move(id), std::move(text), *lexicon_);
  }

  std::vector<ObjectEntity> extract(const Prompt& p) const {
    if (p.tokens.empty()) return {};
    if (mode_ == ExtractionMode::RemoteParser) return extract_remote(p);
    auto tags = detail::tag_tokens(p, *lexicon_);
    std::vector<ObjectEntity> out;
    for (const auto& c : detail::chunk(p, tags)) {
      ObjectEntity e;
      e.span = c.span;
      e.phrase = detail::span_text(p, c.span);
      e.head_lemma = p.tokens[c.key.end].lemma;
      out.push_back(std::move(e));
    }
    return out;
  }

  /// Indices over which an object's attention is averaged: every token of
  /// the span except determiners, conjunctions and other function words.
  std::vector<size_t> head_token_indices(const ObjectEntity& e, const Prompt& p) const {
    check_span(e, p);
    auto tags = detail::tag_tokens(p, *lexicon_);
    std::vector<size_t> out;
    for (size_t i = e.span.start; i <= e.span.end; ++i)
      if (tags[i] == detail::Tag::Noun || tags[i] == detail::Tag::Adj) out.push_back(i);
    if (out.empty())
      for (size_t i = e.span.start; i <= e.span.end; ++i)
        if (p.tokens[i].lemma == e.head_lemma) out.push_back(i);
    return out;
  }

  /// The noun compound naming the object ("mountain bike" in "red mountain
  /// bike with gears"); the part a hyponym replaces.
  Span noun_key(const ObjectEntity& e, const Prompt& p) const {
    check_span(e, p);
    auto tags = detail::tag_tokens(p, *lexicon_);
    size_t head = e.span.end;
    for (size_t i = e.span.start; i <= e.span.end; ++i)
      if (p.tokens[i].lemma == e.head_lemma && tags[i] == detail::Tag::Noun) {
        head = i;
        break;
      }
    size_t start = head;
    while (start > e.span.start && tags[start - 1] == detail::Tag::Noun) --start;
    return {start, head};
  }

  std::string key_lemma(const ObjectEntity& e, const Prompt& p) const {
    Span k = noun_key(e, p);
    std::string out;
    for (size_t i = k.start; i <= k.end; ++i) {
      if (!out.empty()) out += ' ';
      out += p.tokens[i].lemma;
    }
    return out;
  }

 private:
  static void check_span(const ObjectEntity& e, const Prompt& p) {
    if (e.span.start > e.span.end || e.span.end >= p.tokens.size())
      throw Error(ErrorCode::SpanOutOfRange,
                  "span (" + std::to_string(e.span.start) + "," + std::to_string(e.span.end) +
                      ") outside prompt of " + std::to_string(p.tokens.size()) + " tokens");
  }

  std::vector<ObjectEntity> extract_remote(const Prompt& p) const {
    if (!remote_)
      throw Error(ErrorCode::RemoteParserUnavailable, "no remote parser configured");
    auto out = remote_->parse(p);
    std::sort(out.begin(), out.end(),
              [](const ObjectEntity& a, const ObjectEntity& b) { return a.span.start < b.span.start; });
    for (size_t i = 0; i < out.size(); ++i) {
      auto v = validate_object(out[i], p);
      if (!v.empty())
        throw Error(ErrorCode::SpanOutOfRange, "remote parser returned " + out[i].phrase + ": " + v[0]);
      if (i > 0 && out[i - 1].span.overlaps(out[i].span))
        throw Error(ErrorCode::SpanOutOfRange, "remote parser returned overlapping spans");
      out[i].status = ObjectStatus::Unknown;
    }
    return out;
  }

  std::shared_ptr<const Lexicon> lexicon_;
  ExtractionMode mode_;
  std::shared_ptr<ParserCapability> remote_;
};

inline std::vector<ObjectEntity> extract_objects(const Prompt& p, const Extractor& extractor) {
  return extractor.extract(p);
}

inline std::vector<size_t> head_token_indices(const ObjectEntity& e, const Prompt& p,
                                              const Extractor& extractor) {
  return extractor.head_token_indices(e, p);
}

}  // namespace patcher
