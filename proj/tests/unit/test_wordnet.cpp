#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "../support/gen.hpp"

using namespace patcher;

namespace {

const HyponymNode* child_named(const HyponymTree& t, NodeId parent, const std::string& lemma) {
  for (NodeId c : t[parent].children)
    if (t[c].lemma == lemma) return &t[c];
  return nullptr;
}

// Random tree whose node names are hashed into embeddings by a fake
// embedder with per-node similarities under test control.
class TableEmbedder final : public EmbedderCapability {
 public:
  std::map<std::string, std::vector<double>> vectors;
  std::vector<double> embed(const std::string& text) override { return vectors.at(text); }
};

}  // namespace

TEST(WordNet, LoadsFixture) {
  auto wn = support::shared_wordnet();
  EXPECT_GT(wn->synset_count(), 80u);
  const auto* kite = wn->senses("kite");
  ASSERT_NE(kite, nullptr);
  EXPECT_EQ(kite->size(), 2u);
  EXPECT_EQ(wn->synset(kite->front())->words.front(), "kite");
  ASSERT_NE(wn->senses("Mountain Bike"), nullptr);
  EXPECT_EQ(wn->senses("zorblax"), nullptr);
}

TEST(WordNet, BicycleTreeHasMountainBikeChild) {
  auto t = build_hyponym_tree(*support::shared_wordnet(), "bicycle", 6);
  EXPECT_TRUE(t.violations().empty());
  const auto* mb = child_named(t, HyponymTree::kRoot, "mountain bike");
  ASSERT_NE(mb, nullptr);
  EXPECT_EQ(mb->depth, 1);
  EXPECT_TRUE(t.find("suspension fork").has_value());
}

TEST(WordNet, BirdTreeReachesEagle) {
  auto t = build_hyponym_tree(*support::shared_wordnet(), "bird", 6);
  auto eagle = t.find("eagle");
  ASSERT_TRUE(eagle.has_value());
  EXPECT_GE(t[*eagle].depth, 1);
}

TEST(WordNet, LeafIsSingleNode) {
  auto t = build_hyponym_tree(*support::shared_wordnet(), "donut", 6);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.root().lemma, "donut");
}

TEST(WordNet, DepthLimit) {
  auto t = build_hyponym_tree(*support::shared_wordnet(), "bird", 1);
  for (const auto& n : t.nodes) EXPECT_LE(n.depth, 1);
  EXPECT_EQ(t.size(), 3u);
}

TEST(WordNet, Errors) {
  try {
    build_hyponym_tree(*support::shared_wordnet(), "zorblax", 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LemmaNotFound);
  }
  try {
    WordNet::load("/nonexistent/wordnet");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WordNetUnreadable);
  }
}

TEST(Pruning, DriftedSubtreeIsRemoved) {
  auto sim = support::make_sim();
  auto t = prune_tree(build_hyponym_tree(*support::shared_wordnet(), "bicycle", 6), *sim, 0.5);
  EXPECT_TRUE(t.violations().empty());
  auto fork = t.find("suspension fork");
  ASSERT_TRUE(fork.has_value());
  EXPECT_TRUE(t[*fork].pruned);
  EXPECT_LE(*t[*fork].sim_to_root, 0.3);
  EXPECT_FALSE(t[*t.find("mountain bike")].pruned);
  EXPECT_EQ(t.unpruned_non_root(), 5u);
}

TEST(Pruning, VacuousThresholds) {
  auto sim = support::make_sim();
  auto base = build_hyponym_tree(*support::shared_wordnet(), "bird", 6);
  auto none = prune_tree(base, *sim, -1.0);
  EXPECT_EQ(none.unpruned_non_root(), base.size() - 1);
  auto all = prune_tree(base, *sim, 1.01);
  EXPECT_EQ(all.unpruned_non_root(), 0u);
  EXPECT_FALSE(all.root().pruned);
}

TEST(PruningProperty, InvariantsOnRandomTrees) {
  support::Gen g(77);
  for (int trial = 0; trial < 200; ++trial) {
    HyponymTree t;
    TableEmbedder emb;
    t.add(HyponymNode{"n0", "", 0, std::nullopt, {}, std::nullopt, false});
    emb.vectors["n0"] = {1.0, 0.0};
    size_t n = 1 + g.index(20);
    for (size_t i = 1; i <= n; ++i) {
      NodeId parent = g.index(t.size());
      std::string name = "n" + std::to_string(i);
      t.add(HyponymNode{name, "", t[parent].depth + 1, parent, {}, std::nullopt, false});
      double angle = g.real(0.0, 3.14159);
      emb.vectors[name] = {std::cos(angle), std::sin(angle)};
    }
    double threshold = g.real(-1.0, 1.0);
    auto p = prune_tree(t, emb, threshold);
    EXPECT_TRUE(p.violations().empty());
    for (NodeId i = 1; i < p.size(); ++i) {
      if (!p[i].pruned) {
        ASSERT_TRUE(p[i].sim_to_root.has_value());
        EXPECT_GE(*p[i].sim_to_root, threshold);
      }
      if (p[i].pruned) {
        for (NodeId c : p[i].children) EXPECT_TRUE(p[c].pruned);
      }
    }
  }
}
