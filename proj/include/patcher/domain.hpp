#pragma once

// Domain value types shared by the whole pipeline, their validation and
// their canonical JSON encoding.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "patcher/error.hpp"
#include "patcher/text.hpp"

namespace patcher {

using json = nlohmann::json;

struct Token {
  size_t index = 0;
  std::string surface;
  std::string lemma;

  bool operator==(const Token&) const = default;
};

struct Prompt {
  std::string id;
  std::string text;
  std::vector<Token> tokens;

  bool operator==(const Prompt&) const = default;

  size_t size() const { return tokens.size(); }

  std::vector<std::string> surfaces() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.surface);
    return out;
  }
};

/// Tokenize `text` against `lexicon` (for plural lemmas).
inline Prompt make_prompt(std::string id, std::string text, const Lexicon& lexicon) {
  Prompt p;
  p.id = std::move(id);
  p.text = std::move(text);
  auto words = split_words(p.text);
  p.tokens.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i)
    p.tokens.push_back(Token{i, words[i], lexicon.lemmatize(words[i])});
  return p;
}

/// Build a prompt from already-lemmatized tokens; text is the canonical
/// rendering and indices are renumbered.
inline Prompt make_prompt_from_tokens(std::string id, std::vector<Token> tokens) {
  Prompt p;
  p.id = std::move(id);
  for (size_t i = 0; i < tokens.size(); ++i) tokens[i].index = i;
  p.tokens = std::move(tokens);
  p.text = render_words(p.surfaces());
  return p;
}

enum class ObjectStatus { Unknown, Neglected, Correct };

struct Span {
  size_t start = 0;
  size_t end = 0;  // inclusive

  bool operator==(const Span&) const = default;
  size_t length() const { return end - start + 1; }
  bool contains(size_t i) const { return i >= start && i <= end; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
};

struct ObjectEntity {
  std::string phrase;
  std::string head_lemma;
  Span span;
  ObjectStatus status = ObjectStatus::Unknown;

  bool operator==(const ObjectEntity&) const = default;
};

struct TokenAttentionPair {
  size_t token_index = 0;
  double score = 0.0;

  bool operator==(const TokenAttentionPair&) const = default;
};

struct GenerationRecord {
  std::string prompt_id;
  std::string image_ref;
  std::int64_t seed = 0;
  std::vector<TokenAttentionPair> taps;

  bool operator==(const GenerationRecord&) const = default;
};

// Rewrite is the whole-prompt candidate kind of the LLM-Repair baseline.
enum class FeatureKind { Color, Shape, Hyponym, Rewrite };
enum class FeatureSource { Llm, Taxonomy };

struct FeatureCandidate {
  FeatureKind kind = FeatureKind::Color;
  std::string phrase;
  std::string target;
  std::optional<double> att_diff;
  FeatureSource source = FeatureSource::Llm;

  bool operator==(const FeatureCandidate&) const = default;
};

struct TrailEntry {
  FeatureCandidate candidate;
  bool passed = false;
  std::optional<double> att_diff;
  // Text of the prompt this trial generated from.
  std::string prompt;
  // Which neglected object (in repair order) the trial targeted.
  size_t step = 0;

  bool operator==(const TrailEntry&) const = default;
};

enum class RepairStatus { AlreadyCorrect, Repaired, BestEffort };

struct RepairOutcome {
  RepairStatus status = RepairStatus::BestEffort;
  Prompt final_prompt;
  // Total generation calls, including `baseline_generations` stage-one
  // generations that are not trail entries.
  size_t attempts = 0;
  size_t baseline_generations = 0;
  std::vector<TrailEntry> trail;
  std::optional<double> final_att_diff;

  bool operator==(const RepairOutcome&) const = default;
};

// Absent attention differences compare as +infinity.
inline double att_or_inf(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Validation

inline std::vector<std::string> validate_prompt(const Prompt& p) {
  std::vector<std::string> v;
  std::vector<bool> seen(p.tokens.size(), false);
  bool unique = true;
  for (size_t i = 0; i < p.tokens.size(); ++i) {
    const Token& t = p.tokens[i];
    if (t.index != i) v.push_back("token " + std::to_string(i) + ": indices not contiguous");
    if (t.index < seen.size()) {
      if (seen[t.index]) unique = false;
      seen[t.index] = true;
    }
    if (t.surface.empty()) v.push_back("token " + std::to_string(i) + ": empty surface");
    if (t.lemma.empty()) v.push_back("token " + std::to_string(i) + ": empty lemma");
  }
  if (!unique) v.push_back("indices not unique");
  if (split_words(p.text) != p.surfaces())
    v.push_back("tokens do not reproduce text");
  return v;
}

inline std::vector<std::string> validate_object(const ObjectEntity& e, const Prompt& p) {
  std::vector<std::string> v;
  if (e.span.start > e.span.end) {
    v.push_back("start>end");
    return v;
  }
  if (e.span.end >= p.tokens.size()) {
    v.push_back("span out of range");
    return v;
  }
  bool head_inside = false;
  for (size_t i = e.span.start; i <= e.span.end; ++i)
    if (p.tokens[i].lemma == e.head_lemma) head_inside = true;
  if (!head_inside) v.push_back("head_lemma not in span");
  return v;
}

inline std::vector<std::string> validate_prompt(const Prompt& p,
                                                const std::vector<ObjectEntity>& objects) {
  auto v = validate_prompt(p);
  for (const auto& e : objects)
    for (auto& s : validate_object(e, p)) v.push_back(e.phrase + ": " + s);
  return v;
}

inline std::vector<std::string> validate_record(const GenerationRecord& r, const Prompt& p) {
  std::vector<std::string> v;
  if (r.image_ref.empty()) v.push_back("empty image_ref");
  if (r.taps.size() != p.tokens.size()) v.push_back("taps length != token count");
  for (const auto& t : r.taps)
    if (!(t.score >= 0.0) || !std::isfinite(t.score)) v.push_back("negative or non-finite score");
  return v;
}

/// Status/trail consistency of a repair outcome. For multi-object repairs
/// the best-effort rules apply to the entries of the last step.
inline std::vector<std::string> validate_outcome(const RepairOutcome& o) {
  std::vector<std::string> v;
  if (o.attempts != o.trail.size() + o.baseline_generations)
    v.push_back("attempts != trail entries + baseline generations");
  for (const auto& e : o.trail) {
    if (e.candidate.phrase.empty()) v.push_back("empty candidate phrase");
    if (e.att_diff && *e.att_diff < 0) v.push_back("negative att_diff");
  }
  if (o.status == RepairStatus::Repaired) {
    if (o.trail.empty() || !o.trail.back().passed)
      v.push_back("repaired but last trail entry did not pass");
    else if (o.trail.back().prompt != o.final_prompt.text)
      v.push_back("repaired prompt is not the passing trial's prompt");
  }
  if (o.status == RepairStatus::AlreadyCorrect && !o.trail.empty())
    v.push_back("already_correct with a non-empty trail");
  if (o.status == RepairStatus::BestEffort && !o.trail.empty()) {
    size_t last_step = o.trail.back().step;
    const TrailEntry* best = nullptr;
    for (const auto& e : o.trail) {
      if (e.step != last_step) continue;
      if (e.passed) v.push_back("best_effort but a last-step entry passed");
      if (e.att_diff && (!best || *e.att_diff < *best->att_diff)) best = &e;
    }
    if (best) {
      if (best->prompt != o.final_prompt.text)
        v.push_back("best_effort prompt is not the minimal att_diff entry");
      if (!o.final_att_diff || *o.final_att_diff != *best->att_diff)
        v.push_back("final_att_diff does not match the minimal entry");
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// JSON

NLOHMANN_JSON_SERIALIZE_ENUM(ObjectStatus, {{ObjectStatus::Unknown, "unknown"},
                                            {ObjectStatus::Neglected, "neglected"},
                                            {ObjectStatus::Correct, "correct"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FeatureKind, {{FeatureKind::Color, "color"},
                                           {FeatureKind::Shape, "shape"},
                                           {FeatureKind::Hyponym, "hyponym"},
                                           {FeatureKind::Rewrite, "rewrite"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FeatureSource, {{FeatureSource::Llm, "llm"},
                                             {FeatureSource::Taxonomy, "taxonomy"}})
NLOHMANN_JSON_SERIALIZE_ENUM(RepairStatus, {{RepairStatus::AlreadyCorrect, "already_correct"},
                                            {RepairStatus::Repaired, "repaired"},
                                            {RepairStatus::BestEffort, "best_effort"}})

inline std::string to_string(RepairStatus s) { return json(s).get<std::string>(); }
inline std::string to_string(FeatureKind k) { return json(k).get<std::string>(); }

inline json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

inline std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline void to_json(json& j, const Token& t) {
  j = json{{"index", t.index}, {"surface", t.surface}, {"lemma", t.lemma}};
}
inline void from_json(const json& j, Token& t) {
  j.at("index").get_to(t.index);
  j.at("surface").get_to(t.surface);
  j.at("lemma").get_to(t.lemma);
}

inline void to_json(json& j, const Prompt& p) {
  j = json{{"id", p.id}, {"text", p.text}, {"tokens", p.tokens}};
}
inline void from_json(const json& j, Prompt& p) {
  j.at("id").get_to(p.id);
  j.at("text").get_to(p.text);
  j.at("tokens").get_to(p.tokens);
}

inline void to_json(json& j, const ObjectEntity& e) {
  j = json{{"phrase", e.phrase},
           {"head_lemma", e.head_lemma},
           {"span", {e.span.start, e.span.end}},
           {"status", e.status}};
}
inline void from_json(const json& j, ObjectEntity& e) {
  j.at("phrase").get_to(e.phrase);
  j.at("head_lemma").get_to(e.head_lemma);
  e.span.start = j.at("span").at(0).get<size_t>();
  e.span.end = j.at("span").at(1).get<size_t>();
  j.at("status").get_to(e.status);
}

inline void to_json(json& j, const TokenAttentionPair& t) {
  j = json{{"token_index", t.token_index}, {"score", t.score}};
}
inline void from_json(const json& j, TokenAttentionPair& t) {
  j.at("token_index").get_to(t.token_index);
  j.at("score").get_to(t.score);
}

inline void to_json(json& j, const GenerationRecord& r) {
  j = json{{"prompt_id", r.prompt_id}, {"image_ref", r.image_ref}, {"seed", r.seed}, {"taps", r.taps}};
}
inline void from_json(const json& j, GenerationRecord& r) {
  j.at("prompt_id").get_to(r.prompt_id);
  j.at("image_ref").get_to(r.image_ref);
  j.at("seed").get_to(r.seed);
  j.at("taps").get_to(r.taps);
}

inline void to_json(json& j, const FeatureCandidate& c) {
  j = json{{"kind", c.kind},
           {"phrase", c.phrase},
           {"target", c.target},
           {"att_diff", optional_to_json(c.att_diff)},
           {"source", c.source}};
}
inline void from_json(const json& j, FeatureCandidate& c) {
  j.at("kind").get_to(c.kind);
  j.at("phrase").get_to(c.phrase);
  j.at("target").get_to(c.target);
  c.att_diff = optional_from_json(j.at("att_diff"));
  j.at("source").get_to(c.source);
}

inline void to_json(json& j, const TrailEntry& e) {
  j = json{{"candidate", e.candidate},
           {"passed", e.passed},
           {"att_diff", optional_to_json(e.att_diff)},
           {"prompt", e.prompt},
           {"step", e.step}};
}
inline void from_json(const json& j, TrailEntry& e) {
  j.at("candidate").get_to(e.candidate);
  j.at("passed").get_to(e.passed);
  e.att_diff = optional_from_json(j.at("att_diff"));
  j.at("prompt").get_to(e.prompt);
  j.at("step").get_to(e.step);
}

inline void to_json(json& j, const RepairOutcome& o) {
  j = json{{"status", o.status},
           {"final_prompt", o.final_prompt},
           {"attempts", o.attempts},
           {"baseline_generations", o.baseline_generations},
           {"trail", o.trail},
           {"final_att_diff", optional_to_json(o.final_att_diff)}};
}
inline void from_json(const json& j, RepairOutcome& o) {
  j.at("status").get_to(o.status);
  j.at("final_prompt").get_to(o.final_prompt);
  j.at("attempts").get_to(o.attempts);
  j.at("baseline_generations").get_to(o.baseline_generations);
  j.at("trail").get_to(o.trail);
  o.final_att_diff = optional_from_json(j.at("final_att_diff"));
}

}  // namespace patcher
