#pragma once

#include <span>
#include <utility>
#include <vector>

#include "latver/types.hpp"

namespace latver {

/// Statistics fitted on a training set and reapplied to held-out data.
/// For mode None the vectors are empty.
struct NormalizationStats {
  NormalizationMode mode = NormalizationMode::None;
  std::vector<double> pos_mean;
  std::vector<double> neg_mean;
  std::vector<double> scale;  // pooled per-dimension std, floored

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

inline constexpr double kStdFloor = 1e-6;

NormalizationStats fit_normalization(std::span<const QuestionInstance> dataset,
                                     NormalizationMode mode);

std::vector<QuestionInstance> apply_normalization(std::span<const QuestionInstance> dataset,
                                                  const NormalizationStats& stats);

/// Fits statistics on `dataset` and returns the transformed copy with them.
std::pair<std::vector<QuestionInstance>, NormalizationStats> normalize_features(
    std::span<const QuestionInstance> dataset, NormalizationMode mode);

}  // namespace latver
