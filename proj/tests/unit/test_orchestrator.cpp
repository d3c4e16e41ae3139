#include <gtest/gtest.h>

#include "../support/fixtures.hpp"

using namespace patcher;

namespace {

RepairOutcome repair(const std::string& text, PipelineConfig cfg = {}) {
  auto res = support::sim_resources();
  return patcher_repair(res.extractor.prompt("p", text), res, cfg);
}

PipelineResources custom_resources(std::map<std::string, double> salience, std::map<std::string, double> bonus,
                                   SuggestionTable table) {
  SimWorld w;
  w.salience = std::move(salience);
  w.modifier_bonus = std::move(bonus);
  w.depth_bonus = 0.1;
  auto fixture = load_sim_world(support::data_path("sim/world.json"));
  w.hyponyms = fixture.hyponyms;
  auto sim = std::make_shared<SimBackend>(w, support::default_extractor(), std::move(table));
  return PipelineResources{support::default_extractor(), support::sim_backends(sim), support::shared_wordnet()};
}

}  // namespace

TEST(Pipeline, NoNeglectShortCircuits) {
  auto o = repair("a dog and a cat");
  EXPECT_EQ(o.status, RepairStatus::AlreadyCorrect);
  EXPECT_EQ(o.attempts, 1u);
  EXPECT_TRUE(o.trail.empty());
  EXPECT_TRUE(validate_outcome(o).empty());
}

TEST(Pipeline, ModifierRepair) {
  auto o = repair("a dog and an apple");
  EXPECT_EQ(o.status, RepairStatus::Repaired);
  EXPECT_EQ(o.final_prompt.text, "a dog and a red apple");
  // Stage one, then one round of both streams.
  EXPECT_EQ(o.attempts, 3u);
  EXPECT_EQ(o.trail.back().candidate.kind, FeatureKind::Color);
  EXPECT_TRUE(validate_outcome(o).empty());
}

TEST(Pipeline, HyponymRepairWhenNoExplicitFeatures) {
  auto o = repair("a dog and a bird");
  EXPECT_EQ(o.status, RepairStatus::Repaired);
  EXPECT_EQ(o.final_prompt.text, "a dog and an eagle");
  EXPECT_EQ(o.attempts, 4u);
  for (const auto& e : o.trail) EXPECT_EQ(e.candidate.kind, FeatureKind::Hyponym);
  EXPECT_TRUE(validate_outcome(o).empty());
}

TEST(Pipeline, DepthOneHyponymRepair) {
  std::map<std::string, double> sal{{"dog", 3.0}, {"bird", 0.5}, {"songbird", 3.0}};
  auto res = custom_resources(sal, {}, {});
  auto o = patcher_repair(res.extractor.prompt("p", "a dog and a bird"), res, {});
  EXPECT_EQ(o.status, RepairStatus::Repaired);
  EXPECT_EQ(o.final_prompt.text, "a dog and a songbird");
  EXPECT_EQ(o.attempts, 2u);
}

TEST(Pipeline, NothingWorksReturnsMinimalDifference) {
  auto o = repair("a dog and a zorblax");
  EXPECT_EQ(o.status, RepairStatus::BestEffort);
  EXPECT_EQ(o.attempts, 1u);
  EXPECT_EQ(o.final_prompt.text, "a dog and a zorblax");

  SuggestionTable t;
  t[TemplateKind::Color]["apple"] = {"green apple", "brown apple"};
  auto res = custom_resources({{"dog", 3.0}, {"apple", 0.5}}, {{"green", 0.5}}, t);
  auto b = patcher_repair(res.extractor.prompt("p", "a dog and an apple"), res, {});
  EXPECT_EQ(b.status, RepairStatus::BestEffort);
  EXPECT_TRUE(validate_outcome(b).empty());
  // Every candidate, checked by enumeration: the green apple has the
  // largest share, hence the smallest difference.
  double best = std::numeric_limits<double>::infinity();
  std::string best_prompt;
  for (const auto& e : b.trail)
    if (e.att_diff && *e.att_diff < best) {
      best = *e.att_diff;
      best_prompt = e.prompt;
    }
  EXPECT_EQ(best_prompt, "a dog and a green apple");
  EXPECT_EQ(b.final_prompt.text, best_prompt);
  // Color, shape (none), then the apple's three hyponyms, no combined trial.
  EXPECT_EQ(b.attempts, 1u + 2u + 3u);
}

TEST(Pipeline, ModesRestrictCandidateKinds) {
  PipelineConfig cfg;
  cfg.mode = PipelineMode::EfeOnly;
  auto e = repair("a dog and an apple", cfg);
  for (const auto& t : e.trail) EXPECT_NE(t.candidate.kind, FeatureKind::Hyponym);
  EXPECT_EQ(e.attempts, 2u);
  auto b = repair("a dog and a bird", cfg);
  EXPECT_EQ(b.status, RepairStatus::BestEffort);

  cfg.mode = PipelineMode::IfeOnly;
  auto i = repair("a dog and an apple", cfg);
  EXPECT_EQ(i.status, RepairStatus::BestEffort);
  for (const auto& t : i.trail) EXPECT_EQ(t.candidate.kind, FeatureKind::Hyponym);
}

TEST(Pipeline, NoComparisonSetMeansNoDifferences) {
  // Every object neglected: nothing to compare against.
  SimWorld w = load_sim_world(support::data_path("sim/world.json"));
  w.appearance_threshold = 0.9;
  auto sim = std::make_shared<SimBackend>(w, support::default_extractor());
  PipelineResources res{support::default_extractor(), support::sim_backends(sim), support::shared_wordnet()};
  auto o = patcher_repair(res.extractor.prompt("p", "an apple and a bird"), res, {});
  EXPECT_EQ(o.status, RepairStatus::BestEffort);
  EXPECT_FALSE(o.trail.empty());
  for (const auto& e : o.trail) EXPECT_FALSE(e.att_diff.has_value());
  EXPECT_TRUE(validate_outcome(o).empty());
}

TEST(Pipeline, TwoNeglectedObjectsRepairedInOrder) {
  auto o = repair("a dog, an apple and a bird");
  EXPECT_TRUE(validate_outcome(o).empty());
  ASSERT_EQ(o.status, RepairStatus::Repaired) << json(o).dump();
  EXPECT_EQ(o.trail.back().step, 1u);
  auto res = support::sim_resources();
  auto objects = res.extractor.extract(o.final_prompt);
  auto rec = res.backends.generator->generate(o.final_prompt, PipelineConfig{}.seed_for("p"));
  auto img = decode_image_ref(rec.image_ref);
  for (const auto& obj : objects) EXPECT_TRUE(img.present.count(obj.head_lemma)) << obj.head_lemma;
}

TEST(Pipeline, SeedIsStablePerPrompt) {
  PipelineConfig cfg;
  EXPECT_EQ(cfg.seed_for("abc"), cfg.seed_for("abc"));
  EXPECT_GE(cfg.seed_for("abc"), 0);
  cfg.fixed_seed = 17;
  EXPECT_EQ(cfg.seed_for("abc"), 17);
}

TEST(Pipeline, ParallelStreamsMatchSerial) {
  PipelineConfig par;
  par.parallel_streams = true;
  for (std::string text : {"a dog and an apple", "a dog and a bird", "a bench, a clock and a tree"})
    EXPECT_EQ(repair(text), repair(text, par));
}

TEST(Pipeline, QueriesAreRendered) {
  std::vector<std::string> seen;
  PipelineConfig cfg;
  cfg.on_query = [&](const std::string& q) { seen.push_back(q); };
  repair("a dog and an apple", cfg);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].rfind("What are the most common color of the apple?", 0), 0u);
  EXPECT_EQ(seen[1].rfind("What are the common shapes of the apple?", 0), 0u);
}

TEST(LlmRepair, ThirdCandidateRepairs) {
  auto res = support::sim_resources();
  auto o = llm_repair_baseline(res.extractor.prompt("p", "a dog and an apple"), res, {});
  EXPECT_EQ(o.status, RepairStatus::Repaired);
  EXPECT_EQ(o.attempts, 4u);
  EXPECT_EQ(o.final_prompt.text, "a dog and a big red apple");
  EXPECT_TRUE(validate_outcome(o).empty());
}

TEST(LlmRepair, BudgetIsEightTrials) {
  SuggestionTable t;
  for (std::string adj : {"big", "small", "large", "tiny", "tall", "short", "round", "fresh", "old", "young"})
    t[TemplateKind::LlmRepair]["apple"].push_back(adj + " apple");
  auto res = custom_resources({{"dog", 3.0}, {"apple", 0.5}}, {}, t);
  auto o = llm_repair_baseline(res.extractor.prompt("p", "a dog and an apple"), res, {});
  EXPECT_EQ(o.status, RepairStatus::BestEffort);
  EXPECT_EQ(o.trail.size(), 8u);
  EXPECT_EQ(o.attempts, 9u);
}

TEST(LlmRepair, AlreadyCorrect) {
  auto res = support::sim_resources();
  auto o = llm_repair_baseline(res.extractor.prompt("p", "a dog and a cat"), res, {});
  EXPECT_EQ(o.status, RepairStatus::AlreadyCorrect);
  EXPECT_EQ(o.attempts, 1u);
}

TEST(ClipScore, SimulatorRule) {
  auto res = support::sim_resources();
  auto& gen = *res.backends.generator;
  auto& scorer = *res.backends.scorer;
  auto both = res.extractor.prompt("p", "a dog and a cat");
  EXPECT_GE(compute_clipscore(both, gen.generate(both, 1), scorer), 0.88);
  auto half = res.extractor.prompt("p", "a dog and an apple");
  EXPECT_NEAR(compute_clipscore(half, gen.generate(half, 1), scorer), 0.5, 0.02 + 1e-12);
  auto none = res.extractor.prompt("p", "and");
  EXPECT_NEAR(compute_clipscore(none, gen.generate(none, 1), scorer), 0.5, 0.02 + 1e-12);
}
