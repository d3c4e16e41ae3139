#include <gtest/gtest.h>

#include "../support/fixtures.hpp"

using namespace patcher;

namespace {

std::vector<std::string> heads(const std::string& text) {
  auto ex = support::default_extractor();
  std::vector<std::string> out;
  for (const auto& o : ex.extract(ex.prompt("p", text))) out.push_back(o.head_lemma);
  return out;
}

class FixedParser final : public ParserCapability {
 public:
  explicit FixedParser(std::vector<ObjectEntity> objects) : objects_(std::move(objects)) {}
  std::vector<ObjectEntity> parse(const Prompt&) override { return objects_; }

 private:
  std::vector<ObjectEntity> objects_;
};

}  // namespace

TEST(Extraction, ModifierStaysWithItsObject) {
  auto ex = support::default_extractor();
  auto p = ex.prompt("p", "a two-wheeled bicycle and a donut");
  auto objs = ex.extract(p);
  ASSERT_EQ(objs.size(), 2u);
  EXPECT_EQ(objs[0].phrase, "two-wheeled bicycle");
  EXPECT_EQ(objs[0].head_lemma, "bicycle");
  EXPECT_EQ(objs[0].span, (Span{1, 2}));
  EXPECT_EQ(objs[1].phrase, "donut");
  EXPECT_EQ(objs[1].head_lemma, "donut");
}

TEST(Extraction, EmptyPromptHasNoObjects) { EXPECT_TRUE(heads("").empty()); }

TEST(Extraction, ThreeHeads) {
  EXPECT_EQ(heads("a red apple and a bench and a bird"), (std::vector<std::string>{"apple", "bench", "bird"}));
}

TEST(Extraction, CommaListsAndPlurals) {
  EXPECT_EQ(heads("a dog, a cat and an apple"), (std::vector<std::string>{"dog", "cat", "apple"}));
  EXPECT_EQ(heads("two apples on a bench"), (std::vector<std::string>{"apple", "bench"}));
}

TEST(Extraction, WithAttachesToPrecedingObject) {
  auto ex = support::default_extractor();
  auto objs = ex.extract(ex.prompt("p", "a bicycle with chain and gears and a dog"));
  ASSERT_EQ(objs.size(), 2u);
  EXPECT_EQ(objs[0].phrase, "bicycle with chain and gears");
  EXPECT_EQ(objs[0].head_lemma, "bicycle");
  EXPECT_EQ(objs[1].head_lemma, "dog");
}

TEST(Extraction, UnknownWordsUseShapeHeuristics) {
  // "sniffing" reads as a verb; "glittery" modifies the noun it precedes;
  // an unknown word in head position is a noun.
  EXPECT_EQ(heads("a dog sniffing an apple"), (std::vector<std::string>{"dog", "apple"}));
  EXPECT_EQ(heads("a glittery vase"), (std::vector<std::string>{"vase"}));
  EXPECT_EQ(heads("a zorblax"), (std::vector<std::string>{"zorblax"}));
}

TEST(Extraction, HeadTokenIndices) {
  auto ex = support::default_extractor();
  auto p = ex.prompt("p", "a dog and a mountain bike");
  auto objs = ex.extract(p);
  ASSERT_EQ(objs.size(), 2u);
  EXPECT_EQ(ex.head_token_indices(objs[1], p), (std::vector<size_t>{4, 5}));
  EXPECT_EQ(ex.key_lemma(objs[1], p), "mountain bike");

  auto q = ex.prompt("q", "a dog and a cat");
  auto qo = ex.extract(q);
  EXPECT_EQ(ex.head_token_indices(qo[1], q), (std::vector<size_t>{4}));

  auto r = ex.prompt("r", "a two-wheeled bicycle");
  auto ro = ex.extract(r);
  EXPECT_EQ(ex.head_token_indices(ro[0], r), (std::vector<size_t>{1, 2}));
  EXPECT_EQ(ex.noun_key(ro[0], r), (Span{2, 2}));
}

TEST(Extraction, WithPhraseHeadsSkipFunctionWords) {
  auto ex = support::default_extractor();
  auto p = ex.prompt("p", "a bicycle with pedals");
  auto objs = ex.extract(p);
  ASSERT_EQ(objs.size(), 1u);
  EXPECT_EQ(ex.head_token_indices(objs[0], p), (std::vector<size_t>{1, 3}));
  EXPECT_EQ(ex.noun_key(objs[0], p), (Span{1, 1}));
}

TEST(Extraction, SpanOutsidePromptIsRejected) {
  auto ex = support::default_extractor();
  auto p = ex.prompt("p", "a dog");
  ObjectEntity o{"dog", "dog", {1, 5}, ObjectStatus::Unknown};
  try {
    ex.head_token_indices(o, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SpanOutOfRange);
  }
}

TEST(Extraction, Deterministic) {
  auto ex = support::default_extractor();
  auto p = ex.prompt("p", "a red apple, a bench with gears and a bird near a tree");
  EXPECT_EQ(ex.extract(p), ex.extract(p));
}

TEST(Extraction, RemoteModeNeedsParser) {
  Extractor ex(support::shared_lexicon(), ExtractionMode::RemoteParser);
  try {
    ex.extract(ex.prompt("p", "a dog"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RemoteParserUnavailable);
  }
}

TEST(Extraction, RemoteModeValidatesAndSorts) {
  auto parser = std::make_shared<FixedParser>(std::vector<ObjectEntity>{
      {"cat", "cat", {4, 4}, ObjectStatus::Correct}, {"dog", "dog", {1, 1}, ObjectStatus::Unknown}});
  Extractor ex(support::shared_lexicon(), ExtractionMode::RemoteParser, parser);
  auto objs = ex.extract(ex.prompt("p", "a dog and a cat"));
  ASSERT_EQ(objs.size(), 2u);
  EXPECT_EQ(objs[0].head_lemma, "dog");
  EXPECT_EQ(objs[1].status, ObjectStatus::Unknown);

  auto bad = std::make_shared<FixedParser>(std::vector<ObjectEntity>{{"cat", "cat", {4, 7}, ObjectStatus::Unknown}});
  Extractor ex2(support::shared_lexicon(), ExtractionMode::RemoteParser, bad);
  EXPECT_THROW(ex2.extract(ex2.prompt("p", "a dog and a cat")), Error);
}
