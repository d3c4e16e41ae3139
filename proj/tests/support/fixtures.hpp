#pragma once

#include <memory>
#include <string>

#include "patcher/patcher.hpp"

namespace patcher::support {

inline std::string data_path(const std::string& rel) { return std::string(PATCHER_DATA_DIR) + "/" + rel; }

inline std::shared_ptr<const Lexicon> shared_lexicon() {
  static auto lex = std::make_shared<const Lexicon>(Lexicon::load(data_path("lexicon.tsv")));
  return lex;
}

inline Extractor default_extractor() { return Extractor(shared_lexicon()); }

inline std::shared_ptr<const WordNet> shared_wordnet() {
  static auto wn = std::make_shared<const WordNet>(WordNet::load(data_path("wordnet")));
  return wn;
}

inline std::shared_ptr<SimBackend> make_sim() {
  return std::make_shared<SimBackend>(load_sim_world(data_path("sim/world.json")), default_extractor(),
                                      load_suggestions(data_path("sim/suggestions.json")));
}

inline Backends sim_backends(const std::shared_ptr<SimBackend>& sim) { return Backends{sim, sim, sim, sim}; }

inline PipelineResources sim_resources() {
  auto sim = make_sim();
  return PipelineResources{default_extractor(), sim_backends(sim), shared_wordnet()};
}

}  // namespace patcher::support
