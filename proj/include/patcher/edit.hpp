#pragma once

// Token-level prompt editing shared by enhancement and the simulator.

#include <string>
#include <vector>

#include "patcher/domain.hpp"

namespace patcher {

struct SpliceResult {
  Prompt prompt;
  // Span the replacement occupies in the new prompt.
  Span inserted;
};

/// Replace the tokens of `span` with the tokens of `replacement`. Tokens
/// outside the span are copied unchanged, except that an "a"/"an" directly
/// before the span is made to agree with the first inserted word.
inline SpliceResult splice(const Prompt& p, Span span, const std::string& replacement,
                           const Lexicon& lexicon) {
  if (span.start > span.end || span.end >= p.tokens.size())
    throw Error(ErrorCode::SpanMismatch, "span outside prompt");
  auto words = split_words(replacement);
  if (words.empty()) throw Error(ErrorCode::InvalidArgument, "empty replacement phrase");

  std::vector<Token> tokens;
  tokens.reserve(p.tokens.size() + words.size());
  for (size_t i = 0; i < span.start; ++i) tokens.push_back(p.tokens[i]);
  for (const auto& w : words) tokens.push_back(Token{0, w, lexicon.lemmatize(w)});
  for (size_t i = span.end + 1; i < p.tokens.size(); ++i) tokens.push_back(p.tokens[i]);

  if (span.start > 0) {
    Token& article = tokens[span.start - 1];
    std::string fixed = agree_article(article.surface, words.front());
    if (fixed != article.surface) {
      article.surface = fixed;
      article.lemma = to_lower(fixed);
    }
  }
  SpliceResult r;
  r.inserted = {span.start, span.start + words.size() - 1};
  r.prompt = make_prompt_from_tokens(p.id, std::move(tokens));
  return r;
}

}  // namespace patcher
