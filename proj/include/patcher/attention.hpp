#pragma once

// Object-level attention scores and the attention-difference metrics.

#include <cmath>
#include <span>
#include <vector>

#include "patcher/domain.hpp"

namespace patcher {

/// Mean of the token scores at `indices`.
inline double object_attention(std::span<const TokenAttentionPair> taps,
                               std::span<const size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::EmptyIndexList, "no token indices");
  double sum = 0.0;
  for (size_t i : indices) {
    if (i >= taps.size())
      throw Error(ErrorCode::IndexOutOfRange,
                  "token " + std::to_string(i) + " of " + std::to_string(taps.size()));
    sum += taps[i].score;
  }
  return sum / static_cast<double>(indices.size());
}

/// Mean absolute difference over all (neglected, correct) score pairs.
inline double attention_difference(std::span<const double> neglected,
                                   std::span<const double> correct) {
  if (neglected.empty() || correct.empty())
    throw Error(ErrorCode::EmptySet, "attention difference needs both sets non-empty");
  double sum = 0.0;
  for (double n : neglected)
    for (double c : correct) sum += std::fabs(n - c);
  return sum / (static_cast<double>(neglected.size()) * static_cast<double>(correct.size()));
}

/// Mean |s_i - s_j| over unordered pairs i < j.
inline double pairwise_mean_abs_diff(std::span<const double> scores) {
  if (scores.size() < 2) throw Error(ErrorCode::TooFewScores, "need at least two scores");
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); ++i)
    for (size_t j = i + 1; j < scores.size(); ++j) sum += std::fabs(scores[i] - scores[j]);
  const double n = static_cast<double>(scores.size());
  return sum / (n * (n - 1.0) / 2.0);
}

/// One score per object of a prompt, in extraction order.
struct AttentionProfile {
  std::vector<double> per_object;
};

}  // namespace patcher
