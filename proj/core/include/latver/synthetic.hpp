#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "latver/trainer.hpp"
#include "latver/types.hpp"

namespace latver {

/// Planted-truth feature generator. For a path with truth bit y and sign
/// s = 2y - 1:
///   pos = offset + s * v + noise,   neg = -offset - s * v + noise'
/// where v is a fixed random direction of length truth_direction_norm and
/// offset a fixed random direction of length template_offset_norm.
struct SyntheticSpec {
  std::size_t dim = 64;
  std::size_t questions = 1000;
  std::size_t paths_per_question = 10;
  double truth_direction_norm = 1.0;
  double noise_std = 0.75;
  double template_offset_norm = 4.0;
  // Number of answer groups per question is uniform in [min_groups, max_groups],
  // clipped to [1, N - 1] so a unique largest group can exist.
  std::size_t min_groups = 2;
  std::size_t max_groups = 6;
  // Fraction of questions whose gold group is not the (unique) largest group.
  double minority_correct_rate = 0.2;
  // Probability that a wrong path yields no extractable answer.
  double no_answer_rate = 0.0;
  // Answer confidence is 0.5 + gap * s / 2 + N(0, 0.15^2), clipped to [0, 1].
  double confidence_truth_gap = 0.2;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws InvalidSpec
};

/// Deterministic per seed; every question carries gold labels and a gold
/// answer, and its gold group is nonempty.
std::vector<QuestionInstance> generate(const SyntheticSpec& spec);

/// Question-level split: the first `train_count` questions train, the rest test.
struct DatasetSplit {
  std::vector<QuestionInstance> train;
  std::vector<QuestionInstance> test;
};

DatasetSplit split_dataset(std::vector<QuestionInstance> dataset, std::size_t test_count);

/// Normalizes `test` with the report's statistics and returns sum-strategy
/// selection accuracy.
double selection_accuracy(const TrainReport& report, std::span<const QuestionInstance> test);

/// Supervised-BCE verifier trained on `split.train`, scored on `split.test`
/// with the sum strategy.
double oracle_supervised_ceiling(const DatasetSplit& split, const TrainConfig& config);

}  // namespace latver
