#pragma once

// Stage one: decide which objects the generated image neglected, by
// thresholding object-image similarity.

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "patcher/attention.hpp"
#include "patcher/backends.hpp"
#include "patcher/extraction.hpp"

namespace patcher {

inline constexpr double kDefaultDetectionThreshold = 0.5;

struct DetectionEntry {
  ObjectEntity object;
  double similarity = 0;
  // Object attention in the generation the report was built from.
  double attention = 0;
};

struct NeglectReport {
  std::string prompt_id;
  std::vector<DetectionEntry> entries;
  double threshold = kDefaultDetectionThreshold;
  std::vector<ObjectEntity> neglected;
  std::vector<ObjectEntity> correct;

  bool needs_repair() const { return !neglected.empty(); }

  std::vector<double> attention_of(ObjectStatus status) const {
    std::vector<double> out;
    for (const auto& e : entries)
      if (e.object.status == status) out.push_back(e.attention);
    return out;
  }
};

/// Attention score of each object (mean over its head tokens).
inline AttentionProfile attention_profile(const Prompt& p, const std::vector<ObjectEntity>& objects,
                                          const GenerationRecord& rec, const Extractor& extractor) {
  AttentionProfile prof;
  for (const auto& o : objects) {
    auto idx = extractor.head_token_indices(o, p);
    prof.per_object.push_back(object_attention(rec.taps, idx));
  }
  return prof;
}

inline NeglectReport identify_neglected(const Prompt& p, const std::vector<ObjectEntity>& objects,
                                        const GenerationRecord& rec, ScorerCapability& scorer,
                                        double threshold, const Extractor& extractor) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorCode::InvalidArgument, "detection threshold must lie in (0,1)");
  NeglectReport r;
  r.prompt_id = p.id;
  r.threshold = threshold;
  auto prof = attention_profile(p, objects, rec, extractor);
  for (size_t i = 0; i < objects.size(); ++i) {
    DetectionEntry e{objects[i], scorer.similarity(rec.image_ref, objects[i].phrase), prof.per_object[i]};
    e.object.status = e.similarity < threshold ? ObjectStatus::Neglected : ObjectStatus::Correct;
    (e.object.status == ObjectStatus::Neglected ? r.neglected : r.correct).push_back(e.object);
    r.entries.push_back(std::move(e));
  }
  return r;
}

struct Calibration {
  double threshold = kDefaultDetectionThreshold;
  double balanced_accuracy = 0;
  bool low_confidence = false;
};

// Below this balanced accuracy a calibrated threshold is flagged.
inline constexpr double kConfidentBalancedAccuracy = 0.8;

/// Sweep the midpoints between consecutive distinct similarities and keep
/// the one with the best balanced accuracy (ties: larger threshold).
inline Calibration calibrate_threshold(const std::vector<std::pair<double, bool>>& labeled) {
  size_t positives = 0;
  for (const auto& [s, present] : labeled) positives += present ? 1 : 0;
  const size_t negatives = labeled.size() - positives;
  if (positives == 0 || negatives == 0)
    throw Error(ErrorCode::SingleClassInput, "calibration needs present and absent samples");

  std::vector<double> values;
  for (const auto& [s, _] : labeled) values.push_back(s);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  auto balanced_accuracy = [&](double t) {
    size_t tp = 0, tn = 0;
    for (const auto& [s, present] : labeled) {
      if (present && s >= t) ++tp;
      if (!present && s < t) ++tn;
    }
    return 0.5 * (static_cast<double>(tp) / positives + static_cast<double>(tn) / negatives);
  };

  Calibration best;
  if (values.size() < 2) {
    best.threshold = values.front();
    best.balanced_accuracy = balanced_accuracy(best.threshold);
    best.low_confidence = true;
    return best;
  }
  best.balanced_accuracy = -1;
  for (size_t i = 0; i + 1 < values.size(); ++i) {
    double t = 0.5 * (values[i] + values[i + 1]);
    double ba = balanced_accuracy(t);
    if (ba >= best.balanced_accuracy) {
      best.balanced_accuracy = ba;
      best.threshold = t;
    }
  }
  best.low_confidence = best.balanced_accuracy < kConfidentBalancedAccuracy;
  return best;
}

}  // namespace patcher
