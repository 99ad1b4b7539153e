#include "latver/normalization.hpp"

#include <algorithm>
#include <cmath>

namespace latver {

NormalizationStats fit_normalization(std::span<const QuestionInstance> dataset,
                                     NormalizationMode mode) {
  const std::size_t dim = dataset_feature_dim(dataset);
  NormalizationStats stats;
  stats.mode = mode;
  if (mode == NormalizationMode::None) return stats;

  std::vector<double> pos_sum(dim, 0.0), neg_sum(dim, 0.0);
  std::size_t count = 0;
  for (const auto& q : dataset) {
    for (const auto& p : q.pairs) {
      const auto pv = p.pos_features.values();
      const auto nv = p.neg_features.values();
      for (std::size_t j = 0; j < dim; ++j) {
        pos_sum[j] += pv[j];
        neg_sum[j] += nv[j];
      }
      ++count;
    }
  }
  stats.pos_mean.resize(dim);
  stats.neg_mean.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    stats.pos_mean[j] = pos_sum[j] / static_cast<double>(count);
    stats.neg_mean[j] = neg_sum[j] / static_cast<double>(count);
  }

  // Population variance pooled over centered positives and negatives.
  std::vector<double> sq(dim, 0.0);
  for (const auto& q : dataset) {
    for (const auto& p : q.pairs) {
      const auto pv = p.pos_features.values();
      const auto nv = p.neg_features.values();
      for (std::size_t j = 0; j < dim; ++j) {
        const double a = pv[j] - stats.pos_mean[j];
        const double b = nv[j] - stats.neg_mean[j];
        sq[j] += a * a + b * b;
      }
    }
  }
  stats.scale.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    stats.scale[j] = std::max(std::sqrt(sq[j] / static_cast<double>(2 * count)), kStdFloor);
  }
  return stats;
}

namespace {

FeatureVector transform(const FeatureVector& x, const std::vector<double>& mean,
                        const std::vector<double>& scale) {
  const auto v = x.values();
  std::vector<float> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    out[j] = static_cast<float>((static_cast<double>(v[j]) - mean[j]) / scale[j]);
  }
  return FeatureVector(std::move(out));
}

}  // namespace

std::vector<QuestionInstance> apply_normalization(std::span<const QuestionInstance> dataset,
                                                  const NormalizationStats& stats) {
  std::vector<QuestionInstance> out(dataset.begin(), dataset.end());
  if (stats.mode == NormalizationMode::None) return out;
  const std::size_t dim = stats.pos_mean.size();
  if (stats.neg_mean.size() != dim || stats.scale.size() != dim) {
    throw Error(ErrorKind::ShapeMismatch, "normalization statistics have inconsistent sizes");
  }
  for (auto& q : out) {
    if (q.feature_dim() != dim) {
      throw Error(ErrorKind::DimMismatch, "question '" + q.question_id +
                                              "' does not match normalization dim " +
                                              std::to_string(dim));
    }
    for (auto& p : q.pairs) {
      p.pos_features = transform(p.pos_features, stats.pos_mean, stats.scale);
      p.neg_features = transform(p.neg_features, stats.neg_mean, stats.scale);
    }
  }
  return out;
}

std::pair<std::vector<QuestionInstance>, NormalizationStats> normalize_features(
    std::span<const QuestionInstance> dataset, NormalizationMode mode) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "normalize_features: empty dataset");
  NormalizationStats stats = fit_normalization(dataset, mode);
  return {apply_normalization(dataset, stats), std::move(stats)};
}

}  // namespace latver
