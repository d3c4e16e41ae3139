// patcher: command-line front end for repair, evaluation, dataset
// generation and detection-threshold calibration.

#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "patcher/patcher.hpp"
#include "patcher/remote.hpp"

using namespace patcher;

namespace {

struct CliConfig {
  std::string backend = "sim";
  std::string endpoint;
  std::string data_dir = PATCHER_DATA_DIR;
  std::string wordnet_dir;
  double threshold = kDefaultDetectionThreshold;
  double prune_threshold = 0.5;
  std::optional<std::int64_t> seed;
  size_t jobs = 1;
  bool verbose = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string path_in(const CliConfig& c, const std::string& rel) { return c.data_dir + "/" + rel; }

void require_file(const std::string& path, const std::string& flag) {
  std::ifstream f(path);
  if (!f) throw UsageError(flag + ": cannot read " + path);
}

PipelineResources make_resources(const CliConfig& c) {
  require_file(path_in(c, "lexicon.tsv"), "--data-dir");
  auto lex = std::make_shared<const Lexicon>(Lexicon::load(path_in(c, "lexicon.tsv")));
  PipelineResources res{Extractor(lex), {}, nullptr};
  const std::string wn_dir = c.wordnet_dir.empty() ? path_in(c, "wordnet") : c.wordnet_dir;
  require_file(wn_dir + "/index.noun", "--wordnet-dir");
  res.wordnet = std::make_shared<const WordNet>(WordNet::load(wn_dir));

  if (c.backend == "sim") {
    auto sim = std::make_shared<SimBackend>(load_sim_world(path_in(c, "sim/world.json")), res.extractor,
                                            load_suggestions(path_in(c, "sim/suggestions.json")));
    res.backends = Backends{sim, sim, sim, sim};
  } else if (c.backend == "remote") {
    RemoteConfig rc;
    rc.endpoint = resolve_endpoint(c.endpoint);
    if (rc.endpoint.empty()) throw UsageError("--backend remote requires --endpoint (or PATCHER_ENDPOINT)");
    rc.pool_size = std::max<size_t>(c.jobs, 1);
    auto remote = std::make_shared<RemoteBackend>(rc);
    res.backends = Backends{remote, remote, remote, remote};
  } else {
    throw UsageError("--backend must be sim or remote");
  }
  if (c.jobs > 1) res.backends = serialized(res.backends);
  return res;
}

PipelineConfig make_pipeline(const CliConfig& c) {
  PipelineConfig p;
  p.threshold = c.threshold;
  p.enhancement.prune_similarity_threshold = c.prune_threshold;
  p.fixed_seed = c.seed;
  return p;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

/// Runs f(i) for i in [0, n) over `jobs` threads; f writes to its own slot.
template <class F>
void parallel_for(size_t n, size_t jobs, F f) {
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (size_t i; (i = next++) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (size_t t = 1; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

struct RepairArgs {
  std::vector<std::string> prompts;
  std::string input;
  std::string out;
  std::string mode = "full";
  bool no_guidance = false;
};

int cmd_repair(const CliConfig& c, const RepairArgs& a) {
  std::optional<EvalMethod> method = parse_method(a.mode == "full" ? "patcher_full" : a.mode);
  if (!method || *method == EvalMethod::None)
    throw UsageError("--mode must be one of full, efe_only, ife_only, lr_baseline");
  if (a.prompts.empty() == a.input.empty()) throw UsageError("give either prompt text or --input, not both");

  std::vector<PromptRecord> records;
  if (!a.input.empty()) {
    require_file(a.input, "--input");
    records = load_dataset(a.input);
  } else {
    for (size_t i = 0; i < a.prompts.size(); ++i)
      records.push_back(PromptRecord{"cli-" + std::to_string(i), a.prompts[i], {}, 0, DatasetSource::Custom});
  }

  auto res = make_resources(c);
  auto cfg = make_pipeline(c);
  cfg.attention_guidance = !a.no_guidance;
  if (c.verbose) cfg.on_query = [](const std::string& q) { std::cerr << "query: " << q << "\n"; };

  std::vector<RepairOutcome> outcomes(records.size());
  parallel_for(records.size(), c.jobs, [&](size_t i) {
    outcomes[i] = run_method(*method, res.extractor.prompt(records[i].id, records[i].prompt), res, cfg);
  });

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  size_t repaired = 0, already = 0, best_effort = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& o = outcomes[i];
    out << json{{"id", records[i].id}, {"prompt", records[i].prompt}, {"outcome", o}}.dump() << "\n";
    repaired += o.status == RepairStatus::Repaired ? 1 : 0;
    already += o.status == RepairStatus::AlreadyCorrect ? 1 : 0;
    best_effort += o.status == RepairStatus::BestEffort ? 1 : 0;
    if (c.verbose || records.size() == 1)
      std::cerr << records[i].id << ": " << json(o.status).get<std::string>() << " -> \"" << o.final_prompt.text
                << "\" (" << o.attempts << " attempts)\n";
  }
  std::cerr << records.size() << " prompts: " << repaired << " repaired, " << already << " already correct, "
            << best_effort << " best effort\n";
  return best_effort > 0 ? 2 : 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string dataset;
  std::string name;
  std::vector<std::string> methods{"patcher_full"};
  std::string out;
  std::string format = "csv";
  std::string annotations;
  bool no_guidance = false;
};

int cmd_eval(const CliConfig& c, const EvalArgs& a) {
  std::vector<EvalMethod> methods;
  for (const auto& m : a.methods) {
    auto parsed = parse_method(m);
    if (!parsed) {
      std::string valid;
      for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
      throw UsageError("unknown method '" + m + "'; valid methods: " + valid);
    }
    methods.push_back(*parsed);
  }
  ReportFormat format;
  if (a.format == "csv")
    format = ReportFormat::Csv;
  else if (a.format == "markdown")
    format = ReportFormat::Markdown;
  else
    throw UsageError("--format must be csv or markdown");
  require_file(a.dataset, "--dataset");

  auto records = load_dataset(a.dataset);
  std::string name = a.name;
  if (name.empty()) {
    name = a.dataset.substr(a.dataset.find_last_of('/') + 1);
    name = name.substr(0, name.find('.'));
  }
  auto res = make_resources(c);
  auto cfg = make_pipeline(c);
  cfg.attention_guidance = !a.no_guidance;

  std::unique_ptr<Judge> judge;
  if (!a.annotations.empty()) {
    require_file(a.annotations, "--annotations");
    judge = std::make_unique<AnnotationJudge>(import_annotations(a.annotations));
  } else if (c.backend == "sim") {
    judge = std::make_unique<SimJudge>(res.extractor);
  } else {
    throw UsageError("--backend remote needs --annotations to judge correctness");
  }

  EvalReport report;
  for (EvalMethod m : methods) {
    auto run = evaluate(name, records, m, res, cfg, *judge, c.jobs);
    const auto& k = run.row.counts;
    std::cerr << name << " " << to_string(m) << ": CR " << format_fixed(100.0 * run.row.cr, 1) << "% over "
              << k.total << " prompts (" << k.repaired << " repaired, " << k.already_correct
              << " already correct, " << k.best_effort << " best effort)\n";
    report.rows.push_back(run.row);
  }
  if (a.out.empty())
    std::cout << emit_report(report, format);
  else
    write_report(report, format, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string tbp;
  int compose = 0;
  std::string singles;
  std::optional<size_t> limit;
  std::string out;
  bool no_suggester = false;
};

int cmd_gen_dataset(const CliConfig& c, const GenArgs& a) {
  if (a.tbp.empty() == (a.compose == 0)) throw UsageError("give exactly one of --tbp or --compose");
  std::vector<PromptRecord> records;
  if (!a.tbp.empty()) {
    require_file(a.tbp, "--tbp");
    records = generate_tbp(read_json_file(a.tbp).get<TbpVocabulary>());
  } else {
    std::string singles_path = a.singles.empty() ? path_in(c, "vocab/coco80.txt") : a.singles;
    require_file(singles_path, "--singles");
    std::ifstream in(singles_path);
    std::vector<std::string> singles;
    for (std::string line; std::getline(in, line);)
      if (auto t = trim(line); !t.empty()) singles.push_back(t);
    auto lex = std::make_shared<const Lexicon>(Lexicon::load(path_in(c, "lexicon.tsv")));
    Extractor ex(lex);
    std::shared_ptr<SuggesterCapability> suggester;
    if (!a.no_suggester) suggester = make_resources(c).backends.suggester;
    if (!suggester) std::cerr << "warning: no suggester backend; using template composition\n";
    ComposeStats stats;
    records = compose_multiobject(singles, a.compose, suggester.get(), ex, a.limit, &stats);
    if (suggester && stats.fallback > 0)
      std::cerr << "warning: " << stats.fallback << " of " << records.size()
                << " prompts fell back to template composition\n";
  }
  if (a.out.empty())
    for (const auto& r : records) std::cout << json(r).dump() << "\n";
  else
    save_dataset(records, a.out);
  std::cerr << records.size() << " prompts written\n";
  return 0;
}

// ---------------------------------------------------------------------------

/// CSV with header `similarity,present`, present being 0 or 1.
int cmd_calibrate(const std::string& labeled) {
  require_file(labeled, "--labeled");
  std::ifstream in(labeled);
  std::vector<std::pair<double, bool>> data;
  size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split_csv_line(line);
    if (lineno == 1) {
      if (cols != std::vector<std::string>{"similarity", "present"})
        throw Error(ErrorCode::MalformedRecord, labeled + ":1: header must be similarity,present");
      continue;
    }
    if (cols.size() != 2 || (cols[1] != "0" && cols[1] != "1"))
      throw Error(ErrorCode::MalformedRecord, labeled + ":" + std::to_string(lineno) + ": expected <score>,<0|1>");
    try {
      size_t used = 0;
      double s = std::stod(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument("trailing");
      data.emplace_back(s, cols[1] == "1");
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedRecord, labeled + ":" + std::to_string(lineno) + ": bad similarity");
    }
  }
  auto cal = calibrate_threshold(data);
  std::cout << json{{"threshold", cal.threshold},
                    {"balanced_accuracy", cal.balanced_accuracy},
                    {"low_confidence", cal.low_confidence}}
                   .dump()
            << "\n";
  std::cerr << "threshold " << cal.threshold << " (balanced accuracy " << cal.balanced_accuracy << ")"
            << (cal.low_confidence ? ", low confidence" : "") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliConfig cfg;
  CLI::App app{"Repair text-to-image prompts whose objects are neglected"};
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--backend", cfg.backend, "Model backend")->check(CLI::IsMember({"sim", "remote"}));
  app.add_option("--endpoint", cfg.endpoint, "Sidecar URL for --backend remote")->envname("PATCHER_ENDPOINT");
  app.add_option("--data-dir", cfg.data_dir, "Lexicon, simulator and vocabulary data");
  app.add_option("--wordnet-dir", cfg.wordnet_dir, "WordNet database directory (default <data-dir>/wordnet)")
      ->envname("PATCHER_WORDNET_DIR");
  app.add_option("--threshold", cfg.threshold, "Detection threshold on image-text similarity")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--prune-threshold", cfg.prune_threshold, "Hyponym pruning similarity threshold");
  app.add_option("--seed", cfg.seed, "Fixed generation seed (default: derived from prompt id)");
  app.add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", cfg.verbose, "Log queries and per-prompt results to stderr");

  RepairArgs ra;
  auto* repair = app.add_subcommand("repair", "Repair prompts and print outcomes as JSON lines");
  repair->add_option("prompt", ra.prompts, "Prompt text");
  repair->add_option("--input", ra.input, "JSONL prompt records");
  repair->add_option("--out", ra.out, "Write JSON lines here instead of stdout");
  repair->add_option("--mode", ra.mode, "full, efe_only, ife_only or lr_baseline");
  repair->add_flag("--no-guidance", ra.no_guidance, "Plain breadth-first hyponym search");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate methods on a dataset and emit a report");
  eval->add_option("--dataset,--input", ea.dataset, "JSONL prompt records")->required();
  eval->add_option("--name", ea.name, "Dataset name in the report (default: file stem)");
  eval->add_option("--method", ea.methods, "Method(s): " + [] {
    std::string s;
    for (const auto& n : method_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  eval->add_option("--out", ea.out, "Report path (default stdout)");
  eval->add_option("--format", ea.format, "csv or markdown");
  eval->add_option("--annotations", ea.annotations, "Human verdict CSV (prompt_id,annotator,verdict)");
  eval->add_flag("--no-guidance", ea.no_guidance, "Plain breadth-first hyponym search");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-dataset", "Generate prompt datasets as JSONL");
  gen->add_option("--tbp", ga.tbp, "Template vocabulary JSON (animals, objects, colors)");
  gen->add_option("--compose", ga.compose, "Compose multi-object prompts from single lemmas")
      ->check(CLI::IsMember({2, 3}));
  gen->add_option("--singles", ga.singles, "Single-object lemmas, one per line (default COCO-80)");
  gen->add_option("--limit", ga.limit, "Number of combinations to sample");
  gen->add_option("--out", ga.out, "Output JSONL (default stdout)");
  gen->add_flag("--no-suggester", ga.no_suggester, "Compose with the template only");

  std::string labeled;
  auto* cal = app.add_subcommand("calibrate", "Fit the detection threshold on labeled similarities");
  cal->add_option("--labeled", labeled, "CSV with header similarity,present")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*repair) return cmd_repair(cfg, ra);
    if (*eval) return cmd_eval(cfg, ea);
    if (*gen) return cmd_gen_dataset(cfg, ga);
    if (*cal) return cmd_calibrate(labeled);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
