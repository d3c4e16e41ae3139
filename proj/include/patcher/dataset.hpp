#pragma once

// Datasets (template-based and composed multi-object prompts), judges, the
// evaluation loop and Table-style reports.

#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "patcher/orchestrator.hpp"
#include "patcher/sim.hpp"

namespace patcher {

enum class DatasetSource { TBP, TwOP, ThreeOP, Custom };

NLOHMANN_JSON_SERIALIZE_ENUM(DatasetSource, {{DatasetSource::TBP, "TBP"},
                                             {DatasetSource::TwOP, "TwOP"},
                                             {DatasetSource::ThreeOP, "ThreeOP"},
                                             {DatasetSource::Custom, "custom"}})

struct PromptRecord {
  std::string id;
  std::string prompt;
  std::vector<std::string> objects;  // head lemmas
  int num_objects = 0;
  DatasetSource source = DatasetSource::Custom;

  bool operator==(const PromptRecord&) const = default;
};

inline std::vector<std::string> validate_record(const PromptRecord& r) {
  std::vector<std::string> v;
  if (r.id.empty()) v.push_back("empty id");
  if (r.objects.empty()) v.push_back("objects empty");
  if (r.num_objects != static_cast<int>(r.objects.size())) v.push_back("num_objects != length of objects");
  if (r.num_objects < 1 || r.num_objects > 3) v.push_back("num_objects outside 1..3");
  return v;
}

inline void to_json(json& j, const PromptRecord& r) {
  j = json{{"id", r.id}, {"prompt", r.prompt}, {"objects", r.objects}, {"num_objects", r.num_objects},
           {"source", r.source}};
}
inline void from_json(const json& j, PromptRecord& r) {
  j.at("id").get_to(r.id);
  j.at("prompt").get_to(r.prompt);
  j.at("objects").get_to(r.objects);
  j.at("num_objects").get_to(r.num_objects);
  j.at("source").get_to(r.source);
  if (!j.at("source").is_string() ||
      json(r.source).get<std::string>() != j.at("source").get<std::string>())
    throw json::other_error::create(501, "unknown source " + j.at("source").dump(), &j);
}

// ---------------------------------------------------------------------------
// JSONL persistence

inline std::vector<PromptRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::vector<PromptRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    PromptRecord r;
    try {
      r = json::parse(line).get<PromptRecord>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (auto v = validate_record(r); !v.empty())
      throw Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(lineno) + ": " + v.front());
    out.push_back(std::move(r));
  }
  return out;
}

inline void save_dataset(const std::vector<PromptRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (const auto& r : records) out << json(r).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// Template-based prompts

struct TbpVocabulary {
  std::vector<std::string> animals;
  std::vector<std::string> objects;
  std::vector<std::string> colors;
};

inline void from_json(const json& j, TbpVocabulary& v) {
  j.at("animals").get_to(v.animals);
  j.at("objects").get_to(v.objects);
  j.at("colors").get_to(v.colors);
}
inline void to_json(json& j, const TbpVocabulary& v) {
  j = json{{"animals", v.animals}, {"objects", v.objects}, {"colors", v.colors}};
}

// "a"/"an" + phrase.
inline std::string with_article(const std::string& phrase) {
  auto words = split_words(phrase);
  return agree_article("a", words.empty() ? phrase : words.front()) + " " + phrase;
}

/// Three template families: unordered distinct animal pairs; every
/// (animal, color, object); unordered pairs of colored objects with
/// distinct objects.
inline std::vector<PromptRecord> generate_tbp(const TbpVocabulary& vocab) {
  auto check = [](const std::vector<std::string>& list, size_t expected, const char* what) {
    if (list.size() != expected)
      throw Error(ErrorCode::WrongVocabularySize, std::string(what) + ": expected " + std::to_string(expected) +
                                                      ", got " + std::to_string(list.size()));
    if (std::set<std::string>(list.begin(), list.end()).size() != list.size())
      throw Error(ErrorCode::WrongVocabularySize, std::string(what) + " contains duplicates");
  };
  check(vocab.animals, 12, "animals");
  check(vocab.objects, 12, "objects");
  check(vocab.colors, 11, "colors");

  std::vector<PromptRecord> out;
  auto push = [&](const char* family, std::string text, std::vector<std::string> objects) {
    std::ostringstream id;
    id << "tbp-" << family << "-" << std::setw(5) << std::setfill('0') << out.size();
    int n = static_cast<int>(objects.size());
    out.push_back(PromptRecord{id.str(), std::move(text), std::move(objects), n, DatasetSource::TBP});
  };
  const auto& A = vocab.animals;
  const auto& O = vocab.objects;
  const auto& C = vocab.colors;
  for (size_t i = 0; i < A.size(); ++i)
    for (size_t j = i + 1; j < A.size(); ++j)
      push("t1", with_article(A[i]) + " and " + with_article(A[j]), {A[i], A[j]});
  for (const auto& a : A)
    for (const auto& c : C)
      for (const auto& o : O) push("t2", with_article(a) + " and " + with_article(c + " " + o), {a, o});
  std::vector<std::pair<std::string, std::string>> combos;
  for (const auto& o : O)
    for (const auto& c : C) combos.emplace_back(c, o);
  for (size_t i = 0; i < combos.size(); ++i)
    for (size_t j = i + 1; j < combos.size(); ++j) {
      if (combos[i].second == combos[j].second) continue;
      push("t3",
           with_article(combos[i].first + " " + combos[i].second) + " and " +
               with_article(combos[j].first + " " + combos[j].second),
           {combos[i].second, combos[j].second});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Composed multi-object prompts

inline std::string compose_fallback(const std::vector<std::string>& lemmas) {
  std::string s;
  for (size_t i = 0; i < lemmas.size(); ++i) {
    if (i) s += " and ";
    s += with_article(lemmas[i]);
  }
  return s;
}

/// Lemma combinations of size n in lexicographic index order.
inline std::vector<std::vector<size_t>> combinations(size_t count, size_t n) {
  std::vector<std::vector<size_t>> out;
  if (n == 0 || n > count) return out;
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    size_t k = n;
    while (k > 0 && idx[k - 1] == count - n + k - 1) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (size_t i = k; i < n; ++i) idx[i] = idx[i - 1] + 1;
  }
  return out;
}

struct ComposeStats {
  size_t composed = 0;
  size_t fallback = 0;
};

/// One prompt per lemma combination (all pairs for n = 2; for n = 3 a
/// deterministic sample of `limit` triples, default as many as pairs).
/// The suggester's sentence is kept only when extraction recovers every
/// source lemma; otherwise the "a A and a B" template is used.
inline std::vector<PromptRecord> compose_multiobject(const std::vector<std::string>& singles, int n,
                                                     SuggesterCapability* suggester, const Extractor& extractor,
                                                     std::optional<size_t> limit = std::nullopt,
                                                     ComposeStats* stats = nullptr) {
  if (n != 2 && n != 3) throw Error(ErrorCode::InvalidArgument, "compose supports 2 or 3 objects");
  auto combos = combinations(singles.size(), static_cast<size_t>(n));
  size_t want = limit.value_or(singles.size() * (singles.size() - 1) / 2);
  if (combos.size() > want) {
    // Seeded partial Fisher-Yates, then restore index order.
    std::uint64_t state = 0x5eed0000u + static_cast<std::uint64_t>(n);
    for (size_t i = 0; i < want; ++i) {
      size_t j = i + static_cast<size_t>(splitmix64(state) % (combos.size() - i));
      std::swap(combos[i], combos[j]);
    }
    combos.resize(want);
    std::sort(combos.begin(), combos.end());
  }

  // Head lemma of each single as the extractor sees it ("traffic light" -> "light").
  std::vector<std::string> heads;
  for (const auto& s : singles) {
    auto objs = extractor.extract(extractor.prompt("", s));
    heads.push_back(objs.empty() ? to_lower(s) : objs.back().head_lemma);
  }

  std::vector<PromptRecord> out;
  const DatasetSource source = n == 2 ? DatasetSource::TwOP : DatasetSource::ThreeOP;
  for (const auto& c : combos) {
    std::vector<std::string> lemmas, want_heads;
    std::string key;
    for (size_t i : c) {
      lemmas.push_back(singles[i]);
      want_heads.push_back(heads[i]);
      key += (key.empty() ? "" : "|") + singles[i];
    }
    std::string text;
    if (suggester) {
      for (const auto& cand : suggester->suggest(TemplateKind::ComposeMultiobject, key, std::nullopt)) {
        std::multiset<std::string> got;
        for (const auto& o : extractor.extract(extractor.prompt("", cand))) got.insert(o.head_lemma);
        bool ok = true;
        for (const auto& h : want_heads) {
          auto it = got.find(h);
          if (it == got.end()) {
            ok = false;
            break;
          }
          got.erase(it);
        }
        if (ok && !trim(cand).empty()) {
          text = trim(cand);
          break;
        }
      }
    }
    if (stats) ++(text.empty() ? stats->fallback : stats->composed);
    if (text.empty()) text = compose_fallback(lemmas);
    std::ostringstream id;
    id << (n == 2 ? "twop-" : "threeop-") << std::setw(5) << std::setfill('0') << out.size();
    out.push_back(PromptRecord{id.str(), text, want_heads, n, source});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judges

class Judge {
 public:
  virtual ~Judge() = default;
  virtual bool correct(const PromptRecord& record, const Prompt& final_prompt, const GenerationRecord& rec) = 0;
  /// Record ids this judge cannot rule on.
  virtual std::vector<std::string> missing(const std::vector<PromptRecord>&) const { return {}; }
};

/// Ground truth of the simulator: every object of the final prompt is in
/// the image's present set.
class SimJudge final : public Judge {
 public:
  explicit SimJudge(const Extractor& extractor) : extractor_(extractor) {}

  bool correct(const PromptRecord&, const Prompt& final_prompt, const GenerationRecord& rec) override {
    SimImage img = decode_image_ref(rec.image_ref);
    auto objects = extractor_.extract(final_prompt);
    if (objects.empty()) return false;
    for (const auto& o : objects)
      if (!img.present.count(o.head_lemma)) return false;
    return true;
  }

 private:
  const Extractor& extractor_;
};

struct AnnotationRecord {
  std::string prompt_id;
  std::string annotator;
  int verdict = 0;
};

/// Human majority vote: correct iff strictly more than half the annotators
/// said 1.
class AnnotationJudge final : public Judge {
 public:
  explicit AnnotationJudge(const std::vector<AnnotationRecord>& records) {
    for (const auto& r : records) {
      auto& votes = votes_[r.prompt_id];
      if (!votes.emplace(r.annotator, r.verdict).second)
        throw Error(ErrorCode::MalformedRecord,
                    "duplicate verdict for (" + r.prompt_id + ", " + r.annotator + ")");
    }
  }

  bool majority(const std::string& prompt_id) const {
    auto it = votes_.find(prompt_id);
    if (it == votes_.end() || it->second.empty()) throw Error(ErrorCode::NoAnnotators, prompt_id);
    size_t yes = 0;
    for (const auto& [_, v] : it->second) yes += v == 1 ? 1 : 0;
    return 2 * yes > it->second.size();
  }

  bool correct(const PromptRecord& record, const Prompt&, const GenerationRecord&) override {
    return majority(record.id);
  }

  std::vector<std::string> missing(const std::vector<PromptRecord>& records) const override {
    std::vector<std::string> out;
    for (const auto& r : records)
      if (!votes_.count(r.id)) out.push_back(r.id);
    return out;
  }

 private:
  std::map<std::string, std::map<std::string, int>> votes_;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

/// Annotation CSV with header `prompt_id,annotator,verdict`.
inline AnnotationJudge import_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::string line;
  size_t lineno = 0;
  std::vector<AnnotationRecord> recs;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split_csv_line(line);
    if (header) {
      header = false;
      if (cols != std::vector<std::string>{"prompt_id", "annotator", "verdict"})
        throw Error(ErrorCode::MalformedRecord, path + ": header must be prompt_id,annotator,verdict");
      continue;
    }
    if (cols.size() != 3 || (cols[2] != "0" && cols[2] != "1"))
      throw Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(lineno) + ": expected id,annotator,0|1");
    recs.push_back(AnnotationRecord{cols[0], cols[1], cols[2] == "1" ? 1 : 0});
  }
  return AnnotationJudge(recs);
}

// ---------------------------------------------------------------------------
// Evaluation

enum class EvalMethod { PatcherFull, EfeOnly, IfeOnly, LrBaseline, None };

NLOHMANN_JSON_SERIALIZE_ENUM(EvalMethod, {{EvalMethod::PatcherFull, "patcher_full"},
                                          {EvalMethod::EfeOnly, "efe_only"},
                                          {EvalMethod::IfeOnly, "ife_only"},
                                          {EvalMethod::LrBaseline, "lr_baseline"},
                                          {EvalMethod::None, "none"}})

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"patcher_full", "efe_only", "ife_only", "lr_baseline", "none"};
  return names;
}

inline std::optional<EvalMethod> parse_method(const std::string& s) {
  for (const auto& n : method_names())
    if (n == s) return json(s).get<EvalMethod>();
  return std::nullopt;
}

inline std::string to_string(EvalMethod m) { return json(m).get<std::string>(); }

struct EvalCounts {
  size_t total = 0;
  size_t repaired = 0;
  size_t best_effort = 0;
  size_t already_correct = 0;
};

struct EvalRow {
  std::string dataset;
  EvalMethod method = EvalMethod::None;
  double cr = 0;
  double mean_clipscore = 0;
  double mean_attempts = 0;
  EvalCounts counts;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

struct RecordResult {
  RepairOutcome outcome;
  bool judged_correct = false;
  double clipscore = 0;
};

struct EvalRun {
  EvalRow row;
  std::vector<RecordResult> results;  // dataset order
};

inline RepairOutcome run_method(EvalMethod method, const Prompt& p, const PipelineResources& res,
                                PipelineConfig cfg) {
  switch (method) {
    case EvalMethod::PatcherFull:
      cfg.mode = PipelineMode::Full;
      return patcher_repair(p, res, cfg);
    case EvalMethod::EfeOnly:
      cfg.mode = PipelineMode::EfeOnly;
      return patcher_repair(p, res, cfg);
    case EvalMethod::IfeOnly:
      cfg.mode = PipelineMode::IfeOnly;
      return patcher_repair(p, res, cfg);
    case EvalMethod::LrBaseline:
      return llm_repair_baseline(p, res, cfg);
    case EvalMethod::None: {
      StageOne s1 = identify_stage(p, res, cfg);
      RepairOutcome o;
      o.status = s1.report.needs_repair() ? RepairStatus::BestEffort : RepairStatus::AlreadyCorrect;
      o.final_prompt = p;
      o.attempts = 1;
      o.baseline_generations = 1;
      return o;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

/// Run `method` on every record, judge the final image, aggregate. Work is
/// spread over `jobs` threads; results do not depend on scheduling.
inline EvalRun evaluate(const std::string& dataset_name, const std::vector<PromptRecord>& records, EvalMethod method,
                        const PipelineResources& resources, const PipelineConfig& cfg, Judge& judge,
                        size_t jobs = 1) {
  if (auto missing = judge.missing(records); !missing.empty()) {
    std::string ids;
    for (size_t i = 0; i < missing.size() && i < 10; ++i) ids += (i ? ", " : "") + missing[i];
    throw Error(ErrorCode::MissingAnnotations, std::to_string(missing.size()) + " prompts: " + ids);
  }
  PipelineResources res{resources.extractor, serialized(resources.backends), resources.wordnet};
  EvalRun run;
  run.results.resize(records.size());
  std::mutex judge_mutex;
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        const PromptRecord& r = records[i];
        Prompt p = res.extractor.prompt(r.id, r.prompt);
        RecordResult out;
        out.outcome = run_method(method, p, res, cfg);
        GenerationRecord rec = res.backends.generator->generate(out.outcome.final_prompt, cfg.seed_for(r.id));
        {
          std::lock_guard lock(judge_mutex);
          out.judged_correct = judge.correct(r, out.outcome.final_prompt, rec);
        }
        out.clipscore = compute_clipscore(out.outcome.final_prompt, rec, *res.backends.scorer);
        run.results[i] = std::move(out);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(records.size());
      }
    }
  };
  const size_t n = std::max<size_t>(1, std::min(jobs, records.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalRow& row = run.row;
  row.dataset = dataset_name;
  row.method = method;
  row.counts.total = records.size();
  size_t correct = 0;
  double clip = 0, attempts = 0;
  for (const auto& r : run.results) {
    switch (r.outcome.status) {
      case RepairStatus::Repaired: ++row.counts.repaired; break;
      case RepairStatus::BestEffort: ++row.counts.best_effort; break;
      case RepairStatus::AlreadyCorrect: ++row.counts.already_correct; break;
    }
    correct += r.judged_correct ? 1 : 0;
    clip += r.clipscore;
    attempts += static_cast<double>(r.outcome.attempts);
  }
  if (!records.empty()) {
    const double total = static_cast<double>(records.size());
    row.cr = static_cast<double>(correct) / total;
    row.mean_clipscore = clip / total;
    row.mean_attempts = attempts / total;
  }
  return run;
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { Csv, Markdown };

inline std::string format_fixed(double v, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

/// Rows sorted by dataset then method; CR as a percentage with one decimal.
inline std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::vector<EvalRow> rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.dataset != b.dataset) return a.dataset < b.dataset;
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });
  const std::vector<std::string> header{"Dataset", "Method", "CR", "CLIPScore", "MeanAttempts"};
  auto cells = [](const EvalRow& r) {
    return std::vector<std::string>{r.dataset, to_string(r.method), format_fixed(100.0 * r.cr, 1),
                                    format_fixed(r.mean_clipscore, 4), format_fixed(r.mean_attempts, 2)};
  };
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cols) {
    if (format == ReportFormat::Csv) {
      for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    } else {
      out << "|";
      for (const auto& c : cols) out << " " << c << " |";
    }
    out << "\n";
  };
  line(header);
  if (format == ReportFormat::Markdown) line({"---", "---", "---:", "---:", "---:"});
  for (const auto& r : rows) line(cells(r));
  return out.str();
}

inline void write_report(const EvalReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << emit_report(report, format);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace patcher
