#pragma once

// The four model capabilities the pipeline consumes. Implementations: the
// hermetic simulator (sim.hpp) and the HTTP sidecar client (remote.hpp).

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "patcher/domain.hpp"

namespace patcher {

enum class TemplateKind { Shape, Color, LlmRepair, ComposeMultiobject };

NLOHMANN_JSON_SERIALIZE_ENUM(TemplateKind, {{TemplateKind::Shape, "shape"},
                                            {TemplateKind::Color, "color"},
                                            {TemplateKind::LlmRepair, "llm_repair"},
                                            {TemplateKind::ComposeMultiobject, "compose_multiobject"}})

inline std::string to_string(TemplateKind k) { return json(k).get<std::string>(); }

// Backends report whether they tolerate concurrent in-flight calls; callers
// serialize access to the ones that do not.
class Capability {
 public:
  virtual ~Capability() = default;
  virtual bool concurrent() const { return true; }
};

class GeneratorCapability : public virtual Capability {
 public:
  virtual GenerationRecord generate(const Prompt& prompt, std::int64_t seed) = 0;
};

class ScorerCapability : public virtual Capability {
 public:
  /// Image-text similarity in [0, 1].
  virtual double similarity(const std::string& image_ref, const std::string& text) = 0;
};

class SuggesterCapability : public virtual Capability {
 public:
  virtual std::vector<std::string> suggest(TemplateKind kind, const std::string& object,
                                           const std::optional<std::string>& prompt) = 0;
};

class EmbedderCapability : public virtual Capability {
 public:
  virtual std::vector<double> embed(const std::string& text) = 0;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw Error(ErrorCode::InvalidArgument, "cosine of vectors with different dimensions");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

/// The set of capabilities one pipeline run talks to. Any member may be
/// null when the run does not need it.
struct Backends {
  std::shared_ptr<GeneratorCapability> generator;
  std::shared_ptr<ScorerCapability> scorer;
  std::shared_ptr<SuggesterCapability> suggester;
  std::shared_ptr<EmbedderCapability> embedder;

  bool all_concurrent() const {
    auto ok = [](const auto& p) { return !p || p->concurrent(); };
    return ok(generator) && ok(scorer) && ok(suggester) && ok(embedder);
  }
};

namespace detail {

// Decorators that funnel calls to serial-only backends through one mutex.
class SerialGenerator final : public GeneratorCapability {
 public:
  SerialGenerator(std::shared_ptr<GeneratorCapability> inner, std::shared_ptr<std::mutex> m)
      : inner_(std::move(inner)), m_(std::move(m)) {}
  GenerationRecord generate(const Prompt& p, std::int64_t seed) override {
    std::lock_guard lock(*m_);
    return inner_->generate(p, seed);
  }
  bool concurrent() const override { return true; }

 private:
  std::shared_ptr<GeneratorCapability> inner_;
  std::shared_ptr<std::mutex> m_;
};

class SerialScorer final : public ScorerCapability {
 public:
  SerialScorer(std::shared_ptr<ScorerCapability> inner, std::shared_ptr<std::mutex> m)
      : inner_(std::move(inner)), m_(std::move(m)) {}
  double similarity(const std::string& image_ref, const std::string& text) override {
    std::lock_guard lock(*m_);
    return inner_->similarity(image_ref, text);
  }
  bool concurrent() const override { return true; }

 private:
  std::shared_ptr<ScorerCapability> inner_;
  std::shared_ptr<std::mutex> m_;
};

class SerialSuggester final : public SuggesterCapability {
 public:
  SerialSuggester(std::shared_ptr<SuggesterCapability> inner, std::shared_ptr<std::mutex> m)
      : inner_(std::move(inner)), m_(std::move(m)) {}
  std::vector<std::string> suggest(TemplateKind kind, const std::string& object,
                                   const std::optional<std::string>& prompt) override {
    std::lock_guard lock(*m_);
    return inner_->suggest(kind, object, prompt);
  }
  bool concurrent() const override { return true; }

 private:
  std::shared_ptr<SuggesterCapability> inner_;
  std::shared_ptr<std::mutex> m_;
};

class SerialEmbedder final : public EmbedderCapability {
 public:
  SerialEmbedder(std::shared_ptr<EmbedderCapability> inner, std::shared_ptr<std::mutex> m)
      : inner_(std::move(inner)), m_(std::move(m)) {}
  std::vector<double> embed(const std::string& text) override {
    std::lock_guard lock(*m_);
    return inner_->embed(text);
  }
  bool concurrent() const override { return true; }

 private:
  std::shared_ptr<EmbedderCapability> inner_;
  std::shared_ptr<std::mutex> m_;
};

}  // namespace detail

/// Wrap every serial-only member so the bundle can be shared by workers.
/// All wrapped members share one lock: a single object often implements
/// several capabilities.
inline Backends serialized(const Backends& b) {
  Backends out = b;
  auto m = std::make_shared<std::mutex>();
  if (b.generator && !b.generator->concurrent())
    out.generator = std::make_shared<detail::SerialGenerator>(b.generator, m);
  if (b.scorer && !b.scorer->concurrent())
    out.scorer = std::make_shared<detail::SerialScorer>(b.scorer, m);
  if (b.suggester && !b.suggester->concurrent())
    out.suggester = std::make_shared<detail::SerialSuggester>(b.suggester, m);
  if (b.embedder && !b.embedder->concurrent())
    out.embedder = std::make_shared<detail::SerialEmbedder>(b.embedder, m);
  return out;
}

}  // namespace patcher
