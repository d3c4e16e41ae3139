#pragma once

// The end-to-end repair pipeline: detect neglected objects, then run the
// explicit and implicit enhancement streams side by side until one of them
// produces a correct image. Also hosts the LLM-Repair baseline.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "patcher/detection.hpp"
#include "patcher/enhancement.hpp"
#include "patcher/extraction.hpp"
#include "patcher/wordnet.hpp"

namespace patcher {

enum class PipelineMode { Full, EfeOnly, IfeOnly };

NLOHMANN_JSON_SERIALIZE_ENUM(PipelineMode, {{PipelineMode::Full, "full"},
                                            {PipelineMode::EfeOnly, "efe_only"},
                                            {PipelineMode::IfeOnly, "ife_only"}})

struct PipelineConfig {
  EnhancementConfig enhancement;
  double threshold = kDefaultDetectionThreshold;
  PipelineMode mode = PipelineMode::Full;
  int lr_max_iterations = 8;
  // Fixed seed for every prompt; otherwise derived from the prompt id.
  std::optional<std::int64_t> fixed_seed;
  bool attention_guidance = true;
  bool parallel_streams = false;
  // Receives every rendered LLM query before the suggester is called.
  std::function<void(const std::string&)> on_query;

  std::int64_t seed_for(const std::string& prompt_id) const {
    if (fixed_seed) return *fixed_seed;
    return static_cast<std::int64_t>(fnv1a(prompt_id) & 0x7fffffff);
  }
};

/// Long-lived collaborators of the pipeline.
struct PipelineResources {
  Extractor extractor;
  Backends backends;
  std::shared_ptr<const WordNet> wordnet;
};

struct StageOne {
  std::vector<ObjectEntity> objects;
  GenerationRecord record;
  NeglectReport report;
};

inline StageOne identify_stage(const Prompt& p, const PipelineResources& res, const PipelineConfig& cfg) {
  if (auto v = validate_prompt(p); !v.empty())
    throw Error(ErrorCode::InvalidArgument, "invalid prompt " + p.id + ": " + v.front());
  if (!res.backends.generator || !res.backends.scorer)
    throw Error(ErrorCode::InvalidArgument, "pipeline needs a generator and a scorer");
  StageOne s;
  s.objects = res.extractor.extract(p);
  s.record = res.backends.generator->generate(p, cfg.seed_for(p.id));
  if (auto v = validate_record(s.record, p); !v.empty())
    throw Error(ErrorCode::ProtocolViolation, "generator returned " + v.front());
  s.report = identify_neglected(p, s.objects, s.record, *res.backends.scorer, cfg.threshold, res.extractor);
  return s;
}

/// Neglected objects, weakest attention first; ties keep extraction order.
inline std::vector<ObjectEntity> multi_neglect_schedule(const NeglectReport& report) {
  std::vector<const DetectionEntry*> n;
  for (const auto& e : report.entries)
    if (e.object.status == ObjectStatus::Neglected) n.push_back(&e);
  std::stable_sort(n.begin(), n.end(),
                   [](const DetectionEntry* a, const DetectionEntry* b) { return a->attention < b->attention; });
  std::vector<ObjectEntity> out;
  for (const auto* e : n) out.push_back(e->object);
  return out;
}

/// Pruned hyponym tree for `lemma`; a single root node when the taxonomy
/// does not know the lemma.
inline HyponymTree pruned_tree_for(const std::string& lemma, const PipelineResources& res,
                                   const EnhancementConfig& cfg) {
  HyponymTree tree;
  if (!res.wordnet) {
    tree.add(HyponymNode{lemma, "", 0, std::nullopt, {}, std::nullopt, false});
    return tree;
  }
  try {
    tree = build_hyponym_tree(*res.wordnet, lemma, cfg.max_tree_depth);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LemmaNotFound) throw;
    tree.add(HyponymNode{lemma, "", 0, std::nullopt, {}, std::nullopt, false});
    return tree;
  }
  if (res.backends.embedder) tree = prune_tree(std::move(tree), *res.backends.embedder, cfg.prune_similarity_threshold);
  return tree;
}

inline RepairOutcome patcher_repair(const Prompt& p, const PipelineResources& res, const PipelineConfig& cfg) {
  StageOne s1 = identify_stage(p, res, cfg);
  RepairOutcome out;
  out.baseline_generations = 1;
  out.attempts = 1;
  out.final_prompt = p;
  if (!s1.report.needs_repair()) {
    out.status = RepairStatus::AlreadyCorrect;
    return out;
  }

  RepairContext ctx{res.extractor, *res.backends.generator, *res.backends.scorer, cfg.threshold,
                    cfg.seed_for(p.id), cfg.attention_guidance,
                    cfg.parallel_streams && res.backends.all_concurrent()};
  Prompt current = p;
  NeglectReport report = s1.report;
  const size_t max_steps = s1.report.entries.size();

  for (size_t step = 0; step < max_steps; ++step) {
    auto schedule = multi_neglect_schedule(report);
    RepairState state = make_repair_state(current, report, entry_index(report, schedule.front()), step);

    std::vector<CandidateStream*> streams;
    std::optional<ExplicitStream> efe;
    std::optional<HyponymTree> tree;
    std::optional<ImplicitStream> ife;
    if (cfg.mode != PipelineMode::IfeOnly) {
      efe.emplace(state, res.backends.suggester.get(), cfg.enhancement, res.extractor, cfg.on_query);
      streams.push_back(&*efe);
    }
    if (cfg.mode != PipelineMode::EfeOnly) {
      tree = pruned_tree_for(res.extractor.key_lemma(state.target_object(), current), res, cfg.enhancement);
      if (tree->size() == 1 && state.target_object().head_lemma != tree->root().lemma)
        tree = pruned_tree_for(state.target_object().head_lemma, res, cfg.enhancement);
      ife.emplace(state, *tree, res.extractor, ctx.attention_guidance);
      streams.push_back(&*ife);
    }

    StepResult r = run_streams(streams, state, ctx);
    out.attempts += r.entries.size();
    out.trail.insert(out.trail.end(), r.entries.begin(), r.entries.end());

    if (!r.winner) {
      out.status = RepairStatus::BestEffort;
      if (const TrailEntry* b = best_entry(out.trail, step)) {
        out.final_prompt = res.extractor.prompt(p.id, b->prompt);
        out.final_att_diff = b->att_diff;
      } else {
        out.final_prompt = current;
        out.final_att_diff.reset();
      }
      return out;
    }
    current = r.winner->prompt;
    report = r.winner->report;
    out.final_prompt = current;
    out.final_att_diff = r.winner->entry.att_diff;
    if (!report.needs_repair()) {
      out.status = RepairStatus::Repaired;
      return out;
    }
  }
  // Every step fixed its target yet objects remain neglected.
  out.status = RepairStatus::BestEffort;
  return out;
}

/// Iterative LLM rewrite baseline: no attention guidance, whole-prompt
/// candidates tried in the order the LLM returns them.
inline RepairOutcome llm_repair_baseline(const Prompt& p, const PipelineResources& res, const PipelineConfig& cfg) {
  StageOne s1 = identify_stage(p, res, cfg);
  RepairOutcome out;
  out.baseline_generations = 1;
  out.attempts = 1;
  out.final_prompt = p;
  if (!s1.report.needs_repair()) {
    out.status = RepairStatus::AlreadyCorrect;
    return out;
  }
  const std::int64_t seed = cfg.seed_for(p.id);
  Prompt current = p;
  NeglectReport report = s1.report;
  std::set<std::string> tried;
  for (int iter = 0; iter < cfg.lr_max_iterations; ++iter) {
    const ObjectEntity& neglected = report.neglected.front();
    if (cfg.on_query) cfg.on_query(render_llm_repair_query(current.text, neglected.head_lemma));
    std::vector<FeatureCandidate> cands;
    if (res.backends.suggester)
      cands = parse_feature_items(res.backends.suggester->suggest(TemplateKind::LlmRepair, neglected.head_lemma,
                                                                  current.text),
                                  FeatureKind::Rewrite, neglected.head_lemma);
    auto next = std::find_if(cands.begin(), cands.end(),
                             [&](const FeatureCandidate& c) { return !tried.count(c.phrase); });
    if (next == cands.end()) break;
    tried.insert(next->phrase);

    Prompt cand = res.extractor.prompt(p.id, next->phrase);
    auto objects = res.extractor.extract(cand);
    GenerationRecord rec = res.backends.generator->generate(cand, seed);
    if (auto v = validate_record(rec, cand); !v.empty())
      throw Error(ErrorCode::ProtocolViolation, "generator returned " + v.front());
    NeglectReport r = identify_neglected(cand, objects, rec, *res.backends.scorer, cfg.threshold, res.extractor);
    ++out.attempts;
    TrailEntry e;
    e.candidate = *next;
    e.passed = !r.needs_repair();
    e.prompt = cand.text;
    out.trail.push_back(e);
    out.final_prompt = cand;
    if (e.passed) {
      out.status = RepairStatus::Repaired;
      return out;
    }
    current = cand;
    report = std::move(r);
  }
  out.status = RepairStatus::BestEffort;
  return out;
}

/// Whole-prompt image-text similarity of a generation.
inline double compute_clipscore(const Prompt& p, const GenerationRecord& rec, ScorerCapability& scorer) {
  return scorer.similarity(rec.image_ref, p.text);
}

}  // namespace patcher
