#pragma once

// Hermetic simulator standing in for the whole model stack: a salience
// world decides which objects "appear", attention is each object's share of
// total salience, and fixture tables replace the LLM.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "patcher/backends.hpp"
#include "patcher/edit.hpp"
#include "patcher/extraction.hpp"

namespace patcher {

struct HyponymRegistration {
  std::string base;
  int depth = 1;
  // Semantically drifted away from the base concept (embeds far from it).
  bool drifted = false;
};

struct SimWorld {
  std::map<std::string, double> salience;
  std::map<std::string, double> modifier_bonus;
  double depth_bonus = 0.0;
  double appearance_threshold = 0.3;
  std::int64_t seed = 0;
  std::map<std::string, HyponymRegistration> hyponyms;

  static constexpr double kDefaultSalience = 0.1;
  static constexpr double kNonObjectScore = 0.01;
  static constexpr double kJitter = 0.02;
  static constexpr size_t kEmbeddingDim = 256;

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    auto bad = [](double x) { return !std::isfinite(x) || x < 0; };
    for (const auto& [k, s] : salience)
      if (bad(s)) v.push_back("salience of " + k);
    for (const auto& [k, d] : modifier_bonus)
      if (bad(d)) v.push_back("modifier bonus of " + k);
    if (bad(depth_bonus)) v.push_back("depth bonus");
    if (!(appearance_threshold > 0 && appearance_threshold < 1))
      v.push_back("appearance threshold outside (0,1)");
    for (const auto& [k, h] : hyponyms)
      if (h.depth < 1) v.push_back("hyponym depth of " + k);
    return v;
  }
};

inline void from_json(const json& j, HyponymRegistration& h) {
  j.at("base").get_to(h.base);
  h.depth = j.value("depth", 1);
  h.drifted = j.value("drifted", false);
}
inline void to_json(json& j, const HyponymRegistration& h) {
  j = json{{"base", h.base}, {"depth", h.depth}, {"drifted", h.drifted}};
}

inline void from_json(const json& j, SimWorld& w) {
  w.salience = j.value("salience", std::map<std::string, double>{});
  w.modifier_bonus = j.value("modifier_bonus", std::map<std::string, double>{});
  w.depth_bonus = j.value("depth_bonus", 0.0);
  w.appearance_threshold = j.value("appearance_threshold", 0.3);
  w.seed = j.value("seed", std::int64_t{0});
  if (j.contains("hyponyms")) j.at("hyponyms").get_to(w.hyponyms);
}
inline void to_json(json& j, const SimWorld& w) {
  j = json{{"salience", w.salience},         {"modifier_bonus", w.modifier_bonus},
           {"depth_bonus", w.depth_bonus},   {"appearance_threshold", w.appearance_threshold},
           {"seed", w.seed},                 {"hyponyms", w.hyponyms}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, path + ": " + e.what());
  }
}

inline SimWorld load_sim_world(const std::string& path) {
  SimWorld w = read_json_file(path).get<SimWorld>();
  auto v = w.violations();
  if (!v.empty()) throw Error(ErrorCode::InvalidArgument, path + ": " + v.front());
  return w;
}

/// Fixture answers keyed by (template kind, object).
using SuggestionTable = std::map<TemplateKind, std::map<std::string, std::vector<std::string>>>;

inline SuggestionTable load_suggestions(const std::string& path) {
  json j = read_json_file(path);
  SuggestionTable t;
  for (auto& [kind, table] : j.items())
    t[json(kind).get<TemplateKind>()] = table.get<std::map<std::string, std::vector<std::string>>>();
  return t;
}

/// Present-object set and seed decoded from a simulator image handle.
struct SimImage {
  std::int64_t seed = 0;
  std::set<std::string> present;
};

inline std::string encode_image_ref(const SimImage& img) {
  std::string ref = "sim:" + std::to_string(img.seed) + ":";
  bool first = true;
  for (const auto& l : img.present) {
    if (!first) ref += '|';
    ref += l;
    first = false;
  }
  return ref;
}

inline SimImage decode_image_ref(const std::string& ref) {
  if (ref.rfind("sim:", 0) != 0) throw Error(ErrorCode::UnknownImageRef, ref);
  auto colon = ref.find(':', 4);
  if (colon == std::string::npos) throw Error(ErrorCode::UnknownImageRef, ref);
  SimImage img;
  try {
    img.seed = std::stoll(ref.substr(4, colon - 4));
  } catch (const std::exception&) {
    throw Error(ErrorCode::UnknownImageRef, ref);
  }
  std::string rest = ref.substr(colon + 1);
  size_t b = 0;
  while (b < rest.size()) {
    size_t e = rest.find('|', b);
    if (e == std::string::npos) e = rest.size();
    img.present.insert(rest.substr(b, e - b));
    b = e + 1;
  }
  return img;
}

/// Per-object view of one simulated generation.
struct SimObjectState {
  ObjectEntity object;
  std::string key;
  double effective_salience = 0;
  double share = 0;
  bool present = false;
};

class SimBackend final : public GeneratorCapability,
                         public ScorerCapability,
                         public SuggesterCapability,
                         public EmbedderCapability {
 public:
  SimBackend(SimWorld world, Extractor extractor, SuggestionTable suggestions = {})
      : world_(std::move(world)), extractor_(std::move(extractor)), suggestions_(std::move(suggestions)) {
    auto v = world_.violations();
    if (!v.empty()) throw Error(ErrorCode::InvalidArgument, "sim world: " + v.front());
  }

  const SimWorld& world() const { return world_; }
  const Extractor& extractor() const { return extractor_; }

  double effective_salience(const ObjectEntity& o, const Prompt& p) const {
    const std::string key = extractor_.key_lemma(o, p);
    auto lookup = [&](const std::string& lemma) -> std::optional<double> {
      auto it = world_.salience.find(lemma);
      if (it == world_.salience.end()) return std::nullopt;
      return it->second;
    };
    std::optional<double> base = lookup(key);
    if (!base && key != o.head_lemma) base = lookup(o.head_lemma);
    const HyponymRegistration* hypo = nullptr;
    if (auto it = world_.hyponyms.find(key); it != world_.hyponyms.end()) hypo = &it->second;
    if (!base && hypo) base = lookup(hypo->base);
    double s = base.value_or(SimWorld::kDefaultSalience);
    if (hypo) s += world_.depth_bonus * hypo->depth;

    Span k = extractor_.noun_key(o, p);
    for (size_t i : extractor_.head_token_indices(o, p)) {
      if (k.contains(i)) continue;
      if (auto it = world_.modifier_bonus.find(p.tokens[i].lemma); it != world_.modifier_bonus.end())
        s += it->second;
    }
    return s;
  }

  std::vector<SimObjectState> analyze(const Prompt& p) const {
    std::vector<SimObjectState> out;
    double total = 0;
    for (auto& o : extractor_.extract(p)) {
      SimObjectState st;
      st.key = extractor_.key_lemma(o, p);
      st.effective_salience = effective_salience(o, p);
      st.object = std::move(o);
      total += st.effective_salience;
      out.push_back(std::move(st));
    }
    for (auto& st : out) {
      st.share = total > 0 ? st.effective_salience / total : 1.0 / static_cast<double>(out.size());
      st.present = st.share >= world_.appearance_threshold;
    }
    return out;
  }

  GenerationRecord generate(const Prompt& p, std::int64_t seed) override {
    GenerationRecord rec;
    rec.prompt_id = p.id;
    rec.seed = seed;
    rec.taps.resize(p.tokens.size());
    for (size_t i = 0; i < p.tokens.size(); ++i) rec.taps[i] = {i, SimWorld::kNonObjectScore};
    SimImage img;
    img.seed = seed;
    for (const auto& st : analyze(p)) {
      auto idx = extractor_.head_token_indices(st.object, p);
      for (size_t i : idx) rec.taps[i].score = st.share / static_cast<double>(idx.size());
      if (st.present) img.present.insert(st.object.head_lemma);
    }
    rec.image_ref = encode_image_ref(img);
    return rec;
  }

  double similarity(const std::string& image_ref, const std::string& text) override {
    SimImage img = decode_image_ref(image_ref);
    Prompt p = extractor_.prompt("", text);
    auto objects = extractor_.extract(p);
    if (objects.empty()) return 0.5;
    double sum = 0;
    for (const auto& o : objects) sum += img.present.count(o.head_lemma) ? 0.9 : 0.1;
    double base = sum / static_cast<double>(objects.size());
    std::uint64_t h = fnv1a(text, fnv1a(image_ref) ^ static_cast<std::uint64_t>(world_.seed));
    double u = static_cast<double>(h % 1000001) / 1000000.0;
    return std::clamp(base + (2.0 * u - 1.0) * SimWorld::kJitter, 0.0, 1.0);
  }

  std::vector<std::string> suggest(TemplateKind kind, const std::string& object,
                                   const std::optional<std::string>& prompt) override {
    auto kt = suggestions_.find(kind);
    if (kt == suggestions_.end()) return {};
    auto it = kt->second.find(to_lower(object));
    if (it == kt->second.end()) return {};
    if (kind != TemplateKind::LlmRepair || !prompt) return it->second;
    // Rewrites are phrased as replacements for the object inside the prompt.
    Prompt p = extractor_.prompt("", *prompt);
    std::vector<std::string> out;
    for (const auto& o : extractor_.extract(p)) {
      if (o.head_lemma != to_lower(object)) continue;
      for (const auto& phrase : it->second) out.push_back(splice(p, o.span, phrase, extractor_.lexicon()).prompt.text);
      break;
    }
    return out;
  }

  std::vector<double> embed(const std::string& text) override {
    const std::string t = to_lower(trim(text));
    std::string family = t;
    if (auto it = world_.hyponyms.find(t); it != world_.hyponyms.end() && !it->second.drifted)
      family = it->second.base;
    auto fam = gaussian("family:" + family);
    auto own = gaussian("own:" + t);
    std::vector<double> v(SimWorld::kEmbeddingDim);
    double norm = 0;
    for (size_t i = 0; i < v.size(); ++i) {
      v[i] = fam[i] + kOwnWeight * own[i];
      norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  }

 private:
  static constexpr double kOwnWeight = 0.4;

  std::vector<double> gaussian(const std::string& key) const {
    std::uint64_t state = fnv1a(key) ^ static_cast<std::uint64_t>(world_.seed);
    std::vector<double> v(SimWorld::kEmbeddingDim);
    double norm = 0;
    for (size_t i = 0; i < v.size(); i += 2) {
      double u1 = (static_cast<double>(splitmix64(state) >> 11) + 1.0) / 9007199254740993.0;
      double u2 = static_cast<double>(splitmix64(state) >> 11) / 9007199254740992.0;
      double r = std::sqrt(-2.0 * std::log(u1));
      v[i] = r * std::cos(2 * M_PI * u2);
      if (i + 1 < v.size()) v[i + 1] = r * std::sin(2 * M_PI * u2);
    }
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  }

  SimWorld world_;
  Extractor extractor_;
  SuggestionTable suggestions_;
};

}  // namespace patcher
