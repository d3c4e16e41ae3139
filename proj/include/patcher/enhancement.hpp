#pragma once

// Stage two: repair a neglected object by explicit features (color/shape
// modifiers suggested by an LLM) or implicit features (hyponyms searched on
// a pruned taxonomy tree under attention-difference guidance).

#include <deque>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "patcher/attention.hpp"
#include "patcher/backends.hpp"
#include "patcher/detection.hpp"
#include "patcher/edit.hpp"
#include "patcher/extraction.hpp"
#include "patcher/wordnet.hpp"

namespace patcher {

struct EnhancementConfig {
  int max_explicit_iterations = 4;  // per feature kind
  double prune_similarity_threshold = 0.5;
  std::string wordnet_dir;
  int max_tree_depth = 6;
};

// ---------------------------------------------------------------------------
// LLM query templates

inline std::string render_feature_query(FeatureKind kind, std::string_view object_lemma) {
  if (object_lemma.empty()) throw Error(ErrorCode::InvalidArgument, "empty object lemma");
  const std::string obj(object_lemma);
  if (kind == FeatureKind::Shape) {
    return "What are the common shapes of the " + obj + "?\n"
           "\n"
           "Please output the answer without explanation.\n"
           "There are two guidelines:\n"
           "1) The output should add shapes to the neglected object to construct a fluent phrase, "
           "separating each phrase with a semicolon;\n"
           "2) Each shape should originate from a distinct perspective.\n"
           "\n"
           "Example:\n"
           "\n"
           "Question: What are the common shapes of bicycle?\n"
           "\n"
           "Output: two-wheeled bicycle; bicycle with pedals; bicycle with chain and gears\n";
  }
  if (kind == FeatureKind::Color) {
    return "What are the most common color of the " + obj + "?\n"
           "\n"
           "Please output the answer without explanation.\n"
           "There are two guidelines:\n"
           "1) The output should add colors to the neglected object to construct a fluent phrase, "
           "separating each phrase with a semicolon;\n"
           "2) Each color should originate from a distinct perspective.\n"
           "\n"
           "Example:\n"
           "\n"
           "Question: What are the most common colors of apple?\n"
           "\n"
           "Output: red apple; green apple\n";
  }
  throw Error(ErrorCode::InvalidArgument, "feature queries exist for shape and color only");
}

inline std::string render_llm_repair_query(std::string_view input_prompt, std::string_view neglected_object) {
  return "Input Prompt: " + std::string(input_prompt) + "\n"
         "\n"
         "The input prompt is fed into the Text-to-Image model.\n"
         "However, the " + std::string(neglected_object) + " is not shown on the generated image.\n"
         "Please repair the input prompt and output eight repaired prompt and and separating each "
         "prompt with a semicolon without explanation.\n";
}

/// Split a semicolon-separated LLM answer into candidate phrases.
inline std::vector<FeatureCandidate> parse_feature_response(std::string_view text, FeatureKind kind,
                                                            std::string_view target = {}) {
  std::vector<FeatureCandidate> out;
  size_t b = 0;
  while (b <= text.size()) {
    size_t e = text.find(';', b);
    if (e == std::string_view::npos) e = text.size();
    std::string piece = trim(text.substr(b, e - b));
    if (!piece.empty())
      out.push_back(FeatureCandidate{kind, piece, std::string(target), std::nullopt, FeatureSource::Llm});
    b = e + 1;
  }
  return out;
}

inline std::vector<FeatureCandidate> parse_feature_items(const std::vector<std::string>& items,
                                                         FeatureKind kind, std::string_view target) {
  std::string joined;
  for (const auto& i : items) joined += i + ";";
  return parse_feature_response(joined, kind, target);
}

// ---------------------------------------------------------------------------
// Substitution

/// Replace `target`'s span in `p` with `replacement`.
inline Prompt substitute(const Prompt& p, const ObjectEntity& target, const std::string& replacement,
                         const Lexicon& lexicon) {
  if (target.span.start > target.span.end || target.span.end >= p.tokens.size())
    throw Error(ErrorCode::SpanMismatch, "object " + target.phrase + " does not belong to the prompt");
  if (trim(replacement).empty()) throw Error(ErrorCode::InvalidArgument, "empty replacement phrase");
  std::vector<std::string> words;
  for (size_t i = target.span.start; i <= target.span.end; ++i) words.push_back(p.tokens[i].surface);
  if (render_words(words) != target.phrase)
    throw Error(ErrorCode::SpanMismatch, "span text '" + render_words(words) + "' != '" + target.phrase + "'");
  return splice(p, target.span, replacement, lexicon).prompt;
}

// ---------------------------------------------------------------------------
// Trials

struct RepairContext {
  const Extractor& extractor;
  GeneratorCapability& generator;
  ScorerCapability& scorer;
  double threshold = kDefaultDetectionThreshold;
  std::int64_t seed = 0;
  // When false, hyponym search ignores attention differences (plain BFS).
  bool attention_guidance = true;
  // Run the trials of one lockstep round concurrently.
  bool parallel_streams = false;
};

/// The prompt under repair, its detection report and the object targeted.
struct RepairState {
  Prompt prompt;
  NeglectReport report;
  size_t target = 0;  // index into report.entries
  std::optional<double> base_att_diff;
  size_t step = 0;

  const ObjectEntity& target_object() const { return report.entries.at(target).object; }
};

/// Attention difference of one neglected object against the correct set;
/// absent when no object is correct.
inline std::optional<double> target_att_diff(const NeglectReport& r, size_t target) {
  std::vector<double> correct;
  for (size_t i = 0; i < r.entries.size(); ++i)
    if (i != target && r.entries[i].object.status == ObjectStatus::Correct) correct.push_back(r.entries[i].attention);
  if (correct.empty()) return std::nullopt;
  double n = r.entries.at(target).attention;
  return attention_difference(std::span<const double>(&n, 1), correct);
}

inline RepairState make_repair_state(const Prompt& p, const NeglectReport& report, size_t target, size_t step = 0) {
  if (target >= report.entries.size()) throw Error(ErrorCode::InvalidArgument, "target outside report");
  RepairState s{p, report, target, target_att_diff(report, target), step};
  return s;
}

inline size_t entry_index(const NeglectReport& r, const ObjectEntity& o) {
  for (size_t i = 0; i < r.entries.size(); ++i)
    if (r.entries[i].object.span == o.span) return i;
  throw Error(ErrorCode::SpanMismatch, "object " + o.phrase + " not in report");
}

struct Proposal {
  FeatureCandidate candidate;
  Span replace;
};

struct TrialResult {
  TrailEntry entry;
  Prompt prompt;
  NeglectReport report;
  std::optional<size_t> target;  // index into report.entries
};

inline TrialResult run_trial(const RepairState& state, const Proposal& proposal, const RepairContext& ctx) {
  const Extractor& ex = ctx.extractor;
  SpliceResult spliced = splice(state.prompt, proposal.replace, proposal.candidate.phrase, ex.lexicon());
  TrialResult r;
  r.prompt = std::move(spliced.prompt);
  auto objects = ex.extract(r.prompt);
  GenerationRecord rec = ctx.generator.generate(r.prompt, ctx.seed);
  if (auto v = validate_record(rec, r.prompt); !v.empty())
    throw Error(ErrorCode::ProtocolViolation, "generator returned " + v.front());
  r.report = identify_neglected(r.prompt, objects, rec, ctx.scorer, ctx.threshold, ex);

  for (size_t i = 0; i < r.report.entries.size(); ++i)
    if (r.report.entries[i].object.span.overlaps(spliced.inserted)) {
      r.target = i;
      break;
    }

  bool passed = r.target && r.report.entries[*r.target].object.status == ObjectStatus::Correct;
  if (passed) {
    const auto& before = state.report.entries;
    const auto& after = r.report.entries;
    if (before.size() == after.size()) {
      for (size_t i = 0; i < before.size(); ++i)
        if (i != state.target && before[i].object.status == ObjectStatus::Correct &&
            after[i].object.status != ObjectStatus::Correct)
          passed = false;
    } else {
      passed = r.report.neglected.empty();
    }
  }

  std::optional<double> att;
  if (state.base_att_diff && r.target) att = target_att_diff(r.report, *r.target);

  r.entry.candidate = proposal.candidate;
  r.entry.candidate.att_diff = att;
  r.entry.passed = passed;
  r.entry.att_diff = att;
  r.entry.prompt = r.prompt.text;
  r.entry.step = state.step;
  return r;
}

/// A source of trial proposals that learns from each trial's result.
class CandidateStream {
 public:
  virtual ~CandidateStream() = default;
  virtual std::optional<Proposal> next() = 0;
  virtual void observe(const TrialResult& result) = 0;
};

// Color candidates, then shape candidates (each capped), then one combined
// color+shape candidate built from the best of each.
class ExplicitStream final : public CandidateStream {
 public:
  using QueryHook = std::function<void(const std::string&)>;

  ExplicitStream(const RepairState& state, SuggesterCapability* suggester, const EnhancementConfig& cfg,
                 const Extractor& extractor, const QueryHook& on_query = {})
      : state_(state) {
    const ObjectEntity& target = state.target_object();
    object_ = extractor.key_lemma(target, state.prompt);
    const size_t cap = static_cast<size_t>(std::max(0, cfg.max_explicit_iterations));
    if (suggester) {
      for (FeatureKind kind : {FeatureKind::Color, FeatureKind::Shape}) {
        if (on_query) on_query(render_feature_query(kind, object_));
        auto items = suggester->suggest(kind == FeatureKind::Color ? TemplateKind::Color : TemplateKind::Shape,
                                        object_, std::nullopt);
        auto cands = parse_feature_items(items, kind, target.head_lemma);
        if (cands.size() > cap) cands.resize(cap);
        for (auto& c : cands) queue_.push_back(std::move(c));
      }
    }
    Span k = extractor.noun_key(target, state.prompt);
    for (size_t i = k.start; i <= k.end; ++i) object_words_.insert(state.prompt.tokens[i].lemma);
  }

  bool has_candidates() const { return !queue_.empty(); }

  std::optional<Proposal> next() override {
    if (next_ < queue_.size()) return Proposal{queue_[next_++], state_.target_object().span};
    if (combined_done_) return std::nullopt;
    combined_done_ = true;
    if (any_passed_) return std::nullopt;
    auto best = [&](FeatureKind kind) -> const FeatureCandidate* {
      const FeatureCandidate* b = nullptr;
      for (const auto& c : tried_)
        if (c.kind == kind && (!b || att_or_inf(c.att_diff) < att_or_inf(b->att_diff))) b = &c;
      return b;
    };
    const FeatureCandidate* color = best(FeatureKind::Color);
    const FeatureCandidate* shape = best(FeatureKind::Shape);
    if (!color || !shape) return std::nullopt;
    std::string modifier = color_modifier(color->phrase);
    if (modifier.empty()) return std::nullopt;
    FeatureCandidate c{FeatureKind::Shape, modifier + " " + shape->phrase, shape->target, std::nullopt,
                       FeatureSource::Llm};
    return Proposal{c, state_.target_object().span};
  }

  void observe(const TrialResult& result) override {
    tried_.push_back(result.entry.candidate);
    any_passed_ = any_passed_ || result.entry.passed;
  }

 private:
  // Words of a color phrase that are not the object itself ("red" in
  // "red apple"); falls back to trailing words ("in red").
  std::string color_modifier(const std::string& phrase) const {
    auto words = split_words(phrase);
    std::vector<std::string> before, after;
    bool seen_object = false;
    for (const auto& w : words) {
      std::string lw = to_lower(w);
      bool is_object = object_words_.count(lw) != 0 ||
                       (lw.size() > 1 && lw.back() == 's' && object_words_.count(lw.substr(0, lw.size() - 1)) != 0);
      if (is_object) {
        seen_object = true;
        continue;
      }
      (seen_object ? after : before).push_back(w);
    }
    return render_words(before.empty() ? after : before);
  }

  const RepairState& state_;
  std::string object_;
  std::set<std::string> object_words_;
  std::vector<FeatureCandidate> queue_;
  size_t next_ = 0;
  std::vector<FeatureCandidate> tried_;
  bool combined_done_ = false;
  bool any_passed_ = false;
};

// Attention-guided search over the pruned hyponym tree. The frontier starts
// at the root's children; a node whose substitution lowers the attention
// difference below the original opens its children, otherwise its siblings.
class ImplicitStream final : public CandidateStream {
 public:
  ImplicitStream(const RepairState& state, const HyponymTree& tree, const Extractor& extractor,
                 bool guidance)
      : state_(state), tree_(tree), guidance_(guidance && state.base_att_diff.has_value()) {
    replace_ = extractor.noun_key(state.target_object(), state.prompt);
    if (tree.size() > 0) enqueue(tree.root().children);
  }

  bool has_candidates() const { return !frontier_.empty(); }

  std::optional<Proposal> next() override {
    if (frontier_.empty()) return std::nullopt;
    current_ = frontier_.front();
    frontier_.pop_front();
    const HyponymNode& n = tree_[*current_];
    FeatureCandidate c{FeatureKind::Hyponym, n.lemma, state_.target_object().head_lemma, std::nullopt,
                       FeatureSource::Taxonomy};
    return Proposal{c, replace_};
  }

  void observe(const TrialResult& result) override {
    if (!current_) return;
    NodeId node = *current_;
    current_.reset();
    if (result.entry.passed) return;
    if (!guidance_ || att_or_inf(result.entry.att_diff) < att_or_inf(state_.base_att_diff))
      enqueue(tree_[node].children);
    else
      enqueue(tree_.siblings(node));
  }

  size_t pending() const { return frontier_.size(); }

 private:
  void enqueue(const std::vector<NodeId>& ids) {
    for (NodeId id : ids)
      if (!tree_[id].pruned && seen_.insert(id).second) frontier_.push_back(id);
  }

  const RepairState& state_;
  const HyponymTree& tree_;
  bool guidance_;
  Span replace_;
  std::deque<NodeId> frontier_;
  std::set<NodeId> seen_;
  std::optional<NodeId> current_;
};

/// Result of running candidate streams on one repair step.
struct StepResult {
  std::vector<TrailEntry> entries;
  std::optional<TrialResult> winner;
  size_t winner_stream = 0;
  // Per-stream trial counts.
  std::vector<size_t> trials;
};

/// Run the streams in lockstep rounds: each round takes one proposal from
/// every live stream; the step ends after the first round with a passing
/// trial. Within a round the passing entry of the lowest-index stream is
/// placed last in the trail.
inline StepResult run_streams(const std::vector<CandidateStream*>& streams, const RepairState& state,
                              const RepairContext& ctx) {
  StepResult out;
  out.trials.assign(streams.size(), 0);
  std::vector<bool> live(streams.size(), true);
  while (true) {
    std::vector<std::pair<size_t, Proposal>> round;
    for (size_t s = 0; s < streams.size(); ++s) {
      if (!live[s]) continue;
      auto p = streams[s]->next();
      if (!p) {
        live[s] = false;
        continue;
      }
      round.emplace_back(s, std::move(*p));
    }
    if (round.empty()) return out;

    std::vector<TrialResult> results(round.size());
    if (ctx.parallel_streams && round.size() > 1) {
      std::vector<std::future<TrialResult>> futures;
      for (const auto& [s, prop] : round)
        futures.push_back(std::async(std::launch::async, [&, prop] { return run_trial(state, prop, ctx); }));
      for (size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    } else {
      for (size_t i = 0; i < round.size(); ++i) results[i] = run_trial(state, round[i].second, ctx);
    }

    std::optional<size_t> win;
    for (size_t i = 0; i < round.size(); ++i) {
      streams[round[i].first]->observe(results[i]);
      ++out.trials[round[i].first];
      if (results[i].entry.passed && !win) win = i;
    }
    for (size_t i = 0; i < round.size(); ++i)
      if (!win || i != *win) out.entries.push_back(results[i].entry);
    if (win) {
      out.entries.push_back(results[*win].entry);
      out.winner_stream = round[*win].first;
      out.winner = std::move(results[*win]);
      return out;
    }
  }
}

/// Entry with the smallest attention difference (ties: earliest), if any
/// entry carries one.
inline const TrailEntry* best_entry(const std::vector<TrailEntry>& entries, size_t step) {
  const TrailEntry* best = nullptr;
  for (const auto& e : entries)
    if (e.step == step && e.att_diff && (!best || *e.att_diff < *best->att_diff)) best = &e;
  return best;
}

/// Single-step outcome from a stream run over `state`.
inline RepairOutcome outcome_from_step(const RepairState& state, StepResult step, const Extractor& ex) {
  RepairOutcome o;
  o.attempts = step.entries.size();
  o.trail = std::move(step.entries);
  if (step.winner) {
    o.status = RepairStatus::Repaired;
    o.final_prompt = step.winner->prompt;
    o.final_att_diff = step.winner->entry.att_diff;
    return o;
  }
  o.status = RepairStatus::BestEffort;
  if (const TrailEntry* b = best_entry(o.trail, state.step)) {
    o.final_prompt = ex.prompt(state.prompt.id, b->prompt);
    o.final_att_diff = b->att_diff;
  } else {
    o.final_prompt = state.prompt;
  }
  return o;
}

/// Explicit feature enhancement for the first object of the repair
/// schedule (weakest attention first).
inline RepairOutcome explicit_repair(const Prompt& p, const NeglectReport& report, RepairContext& ctx,
                                     SuggesterCapability* suggester, const EnhancementConfig& cfg) {
  if (report.neglected.empty()) throw Error(ErrorCode::InvalidArgument, "explicit repair needs a neglected object");
  size_t target = 0;
  double weakest = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < report.entries.size(); ++i)
    if (report.entries[i].object.status == ObjectStatus::Neglected && report.entries[i].attention < weakest) {
      weakest = report.entries[i].attention;
      target = i;
    }
  RepairState state = make_repair_state(p, report, target);
  ExplicitStream stream(state, suggester, cfg, ctx.extractor);
  return outcome_from_step(state, run_streams({&stream}, state, ctx), ctx.extractor);
}

// ---------------------------------------------------------------------------
// Hyponym tree pruning and search

/// Breadth-first semantic pruning: a node whose embedding is less similar
/// to the root than `threshold` is pruned together with its subtree.
inline HyponymTree prune_tree(HyponymTree tree, EmbedderCapability& embedder, double threshold) {
  if (tree.size() == 0) return tree;
  std::unordered_map<std::string, std::vector<double>> cache;
  auto embed = [&](const std::string& text) -> const std::vector<double>& {
    auto it = cache.find(text);
    if (it == cache.end()) it = cache.emplace(text, embedder.embed(text)).first;
    return it->second;
  };
  const auto root_vec = embed(tree.root().lemma);
  tree[HyponymTree::kRoot].sim_to_root = cosine(root_vec, root_vec);
  tree[HyponymTree::kRoot].pruned = false;

  auto prune_subtree = [&](NodeId id) {
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
      NodeId n = stack.back();
      stack.pop_back();
      tree[n].pruned = true;
      for (NodeId c : tree[n].children) stack.push_back(c);
    }
  };

  std::deque<NodeId> queue(tree.root().children.begin(), tree.root().children.end());
  while (!queue.empty()) {
    NodeId id = queue.front();
    queue.pop_front();
    double sim = cosine(embed(tree[id].lemma), root_vec);
    tree[id].sim_to_root = sim;
    if (sim < threshold) {
      prune_subtree(id);
      continue;
    }
    for (NodeId c : tree[id].children) queue.push_back(c);
  }
  return tree;
}

/// Attention-guided search for one neglected object over its pruned tree.
inline RepairOutcome attention_guided_search(const HyponymTree& tree, const Prompt& p, const NeglectReport& report,
                                             const ObjectEntity& target, RepairContext& ctx) {
  RepairState state = make_repair_state(p, report, entry_index(report, target));
  ImplicitStream stream(state, tree, ctx.extractor, ctx.attention_guidance);
  return outcome_from_step(state, run_streams({&stream}, state, ctx), ctx.extractor);
}

}  // namespace patcher
