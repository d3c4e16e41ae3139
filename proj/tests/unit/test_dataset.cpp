#include <gtest/gtest.h>

#include <fstream>

#include "../support/fixtures.hpp"
#include "../support/gen.hpp"

using namespace patcher;

namespace {

TbpVocabulary tbp_vocab() { return read_json_file(support::data_path("vocab/tbp.json")).get<TbpVocabulary>(); }

std::vector<std::string> coco() {
  std::ifstream in(support::data_path("vocab/coco80.txt"));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) out.push_back(trim(line));
  return out;
}

std::string temp_file(const std::string& name, const std::string& content) {
  std::string path = ::testing::TempDir() + "/" + name;
  std::ofstream(path) << content;
  return path;
}

class ListJudge final : public Judge {
 public:
  explicit ListJudge(std::set<std::string> ok) : ok_(std::move(ok)) {}
  bool correct(const PromptRecord& r, const Prompt&, const GenerationRecord&) override { return ok_.count(r.id); }

 private:
  std::set<std::string> ok_;
};

}  // namespace

TEST(Tbp, CountsMatchEnumeration) {
  auto v = tbp_vocab();
  auto recs = generate_tbp(v);
  std::map<std::string, size_t> per;
  for (const auto& r : recs) ++per[r.id.substr(4, 2)];
  // Independent counts: unordered animal pairs; animal x color x object;
  // unordered pairs of (color, object) whose objects differ.
  size_t t3 = 0;
  for (size_t i = 0; i < 12 * 11; ++i)
    for (size_t j = i + 1; j < 12 * 11; ++j) t3 += (i / 11 != j / 11) ? 1 : 0;
  EXPECT_EQ(per["t1"], 66u);
  EXPECT_EQ(per["t2"], 1584u);
  EXPECT_EQ(per["t3"], t3);
  EXPECT_EQ(t3, 7986u);
}

TEST(Tbp, NoDuplicatesAndFullRecall) {
  auto recs = generate_tbp(tbp_vocab());
  std::set<std::string> texts, ids;
  auto ex = support::default_extractor();
  for (const auto& r : recs) {
    EXPECT_TRUE(texts.insert(r.prompt).second) << r.prompt;
    EXPECT_TRUE(ids.insert(r.id).second);
    EXPECT_TRUE(validate_record(r).empty());
    std::vector<std::string> heads;
    for (const auto& o : ex.extract(ex.prompt(r.id, r.prompt))) heads.push_back(o.head_lemma);
    EXPECT_EQ(heads, r.objects) << r.prompt;
  }
}

TEST(Tbp, ArticlesAgree) {
  auto recs = generate_tbp(tbp_vocab());
  std::set<std::string> texts;
  for (const auto& r : recs) texts.insert(r.prompt);
  EXPECT_TRUE(texts.count("a dog and an elephant"));
  EXPECT_TRUE(texts.count("an elephant and an umbrella") == 0);
  EXPECT_TRUE(texts.count("a cat and an umbrella") == 0);
  EXPECT_TRUE(texts.count("a cat and a red umbrella"));
  EXPECT_TRUE(texts.count("an elephant and a green apple"));
}

TEST(Tbp, WrongVocabularySize) {
  auto v = tbp_vocab();
  v.animals.pop_back();
  try {
    generate_tbp(v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongVocabularySize);
  }
}

TEST(Compose, FixtureSentenceKeptWhenHeadsSurvive) {
  auto sim = support::make_sim();
  auto recs = compose_multiobject({"bicycle", "donut"}, 2, sim.get(), sim->extractor());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].prompt, "a bicycle leaning next to a donut");
  EXPECT_EQ(recs[0].objects, (std::vector<std::string>{"bicycle", "donut"}));
  EXPECT_EQ(recs[0].source, DatasetSource::TwOP);
}

TEST(Compose, FallbackTemplate) {
  auto ex = support::default_extractor();
  auto recs = compose_multiobject({"bicycle", "donut"}, 2, nullptr, ex);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].prompt, "a bicycle and a donut");
  auto three = compose_multiobject({"apple", "bird", "umbrella"}, 3, nullptr, ex);
  ASSERT_EQ(three.size(), 1u);
  EXPECT_EQ(three[0].prompt, "an apple and a bird and an umbrella");
}

TEST(Compose, CocoScale) {
  auto sim = support::make_sim();
  auto singles = coco();
  ASSERT_EQ(singles.size(), 80u);
  ComposeStats stats;
  auto two = compose_multiobject(singles, 2, sim.get(), sim->extractor(), std::nullopt, &stats);
  EXPECT_EQ(two.size(), 3160u);
  EXPECT_GE(stats.composed, 4u);
  auto three = compose_multiobject(singles, 3, sim.get(), sim->extractor());
  EXPECT_EQ(three.size(), 3160u);
  std::set<std::string> texts;
  for (const auto& r : three) {
    EXPECT_EQ(r.num_objects, 3);
    texts.insert(r.prompt);
  }
  EXPECT_EQ(texts.size(), 3160u);
  EXPECT_EQ(three, compose_multiobject(singles, 3, sim.get(), sim->extractor()));
}

TEST(Jsonl, RoundTrip) {
  support::Gen g(4);
  std::vector<PromptRecord> recs;
  for (int i = 0; i < 100; ++i) {
    int n = g.integer(1, 3);
    std::vector<std::string> objs;
    for (int k = 0; k < n; ++k) objs.push_back(g.word());
    recs.push_back(PromptRecord{"r" + std::to_string(i), g.word() + " " + g.word(), objs, n,
                                static_cast<DatasetSource>(g.index(4))});
  }
  std::string path = ::testing::TempDir() + "/roundtrip.jsonl";
  save_dataset(recs, path);
  EXPECT_EQ(load_dataset(path), recs);
}

TEST(Jsonl, MalformedLineIsReportedWithNumber) {
  auto path = temp_file("bad.jsonl",
                        "{\"id\":\"a\",\"prompt\":\"a dog\",\"objects\":[\"dog\"],\"num_objects\":1,\"source\":\"TBP\"}\n"
                        "{\"id\":\"b\",\"prompt\":\"x\",\"objects\":[\"dog\",\"cat\"],\"num_objects\":3,\"source\":\"TBP\"}\n");
  try {
    load_dataset(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  auto bad_source = temp_file(
      "src.jsonl", "{\"id\":\"a\",\"prompt\":\"a dog\",\"objects\":[\"dog\"],\"num_objects\":1,\"source\":\"web\"}\n");
  EXPECT_THROW(load_dataset(bad_source), Error);
}

TEST(Jsonl, EmptyFile) { EXPECT_TRUE(load_dataset(temp_file("empty.jsonl", "")).empty()); }

TEST(Annotations, MajorityVote) {
  auto path = temp_file("ann.csv",
                        "prompt_id,annotator,verdict\n"
                        "p1,a,1\np1,b,1\np1,c,0\n"
                        "p2,a,1\np2,b,0\n"
                        "p3,a,0\np3,b,0\np3,c,0\n");
  auto judge = import_annotations(path);
  EXPECT_TRUE(judge.majority("p1"));
  EXPECT_FALSE(judge.majority("p2"));
  EXPECT_FALSE(judge.majority("p3"));
  try {
    judge.majority("p4");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoAnnotators);
  }
}

TEST(Annotations, RejectsBadInput) {
  EXPECT_THROW(import_annotations(temp_file("h.csv", "id,who,v\np1,a,1\n")), Error);
  EXPECT_THROW(import_annotations(temp_file("v.csv", "prompt_id,annotator,verdict\np1,a,yes\n")), Error);
  EXPECT_THROW(import_annotations(temp_file("d.csv", "prompt_id,annotator,verdict\np1,a,1\np1,a,0\n")), Error);
}

TEST(Evaluate, CorrectRateIsRatio) {
  auto res = support::sim_resources();
  std::vector<PromptRecord> recs;
  std::set<std::string> ok;
  for (int i = 0; i < 10; ++i) {
    std::string id = "r" + std::to_string(i);
    recs.push_back(PromptRecord{id, "a dog and a cat", {"dog", "cat"}, 2, DatasetSource::Custom});
    if (i < 7) ok.insert(id);
  }
  ListJudge judge(ok);
  auto run = evaluate("tiny", recs, EvalMethod::None, res, PipelineConfig{}, judge);
  EXPECT_DOUBLE_EQ(run.row.cr, 0.7);
  EXPECT_EQ(run.row.counts.already_correct, 10u);
  EXPECT_DOUBLE_EQ(run.row.mean_attempts, 1.0);
}

TEST(Evaluate, MissingAnnotations) {
  auto res = support::sim_resources();
  std::vector<PromptRecord> recs{{"p1", "a dog", {"dog"}, 1, DatasetSource::Custom},
                                 {"p9", "a cat", {"cat"}, 1, DatasetSource::Custom}};
  AnnotationJudge judge({{"p1", "a", 1}});
  try {
    evaluate("x", recs, EvalMethod::None, res, PipelineConfig{}, judge);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAnnotations);
  }
}

TEST(Evaluate, NoneMethodMatchesPresentRate) {
  auto res = support::sim_resources();
  auto recs = load_dataset(support::data_path("bench/sim_ablation.jsonl"));
  auto sim = support::make_sim();
  size_t all_present = 0;
  PipelineConfig cfg;
  for (const auto& r : recs) {
    bool ok = true;
    for (const auto& st : sim->analyze(res.extractor.prompt(r.id, r.prompt))) ok = ok && st.present;
    all_present += ok ? 1 : 0;
  }
  SimJudge judge(res.extractor);
  auto run = evaluate("ablation", recs, EvalMethod::None, res, cfg, judge);
  EXPECT_DOUBLE_EQ(run.row.cr, static_cast<double>(all_present) / static_cast<double>(recs.size()));
}

TEST(Evaluate, ScheduleIndependent) {
  auto res = support::sim_resources();
  auto recs = load_dataset(support::data_path("bench/sim_ablation.jsonl"));
  SimJudge judge(res.extractor);
  auto one = evaluate("a", recs, EvalMethod::PatcherFull, res, PipelineConfig{}, judge, 1);
  auto four = evaluate("a", recs, EvalMethod::PatcherFull, res, PipelineConfig{}, judge, 4);
  EXPECT_DOUBLE_EQ(one.row.cr, four.row.cr);
  EXPECT_DOUBLE_EQ(one.row.mean_attempts, four.row.mean_attempts);
  for (size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(one.results[i].outcome, four.results[i].outcome);
}

TEST(Report, RowsAndFormats) {
  EvalReport rep;
  rep.rows.push_back(EvalRow{"TBP", EvalMethod::LrBaseline, 0.5, 0.61234, 5.7, {}});
  rep.rows.push_back(EvalRow{"TBP", EvalMethod::PatcherFull, 1.0, 0.9, 2.3, {}});
  auto csv = emit_report(rep, ReportFormat::Csv);
  EXPECT_EQ(csv,
            "Dataset,Method,CR,CLIPScore,MeanAttempts\n"
            "TBP,patcher_full,100.0,0.9000,2.30\n"
            "TBP,lr_baseline,50.0,0.6123,5.70\n");
  auto md = emit_report(rep, ReportFormat::Markdown);
  EXPECT_EQ(md.substr(0, md.find('\n')), "| Dataset | Method | CR | CLIPScore | MeanAttempts |");
  size_t lines = static_cast<size_t>(std::count(md.begin(), md.end(), '\n'));
  EXPECT_EQ(lines, 4u);
}

TEST(Report, MethodNames) {
  EXPECT_EQ(parse_method("efe_only"), EvalMethod::EfeOnly);
  EXPECT_FALSE(parse_method("greedy").has_value());
  EXPECT_EQ(method_names().size(), 5u);
}
