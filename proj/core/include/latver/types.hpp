#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latver/error.hpp"

namespace latver {

/// Activation vector of one assertion. Entries are stored as float32, the
/// precision the extractor emits and the dataset blob stores.
class FeatureVector {
 public:
  FeatureVector() = default;
  /// Throws MalformedInput if any entry is NaN/Inf or the vector is empty.
  explicit FeatureVector(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<float> values_;
};

/// Normalized final answer of a reasoning path. An empty optional is the
/// NO_ANSWER sentinel (the answer could not be extracted).
class AnswerKey {
 public:
  AnswerKey() = default;  // NO_ANSWER
  explicit AnswerKey(std::string normalized) : value_(std::move(normalized)) {}

  static AnswerKey none() { return AnswerKey{}; }

  bool is_none() const noexcept { return !value_.has_value(); }
  const std::string& str() const;  // precondition: !is_none()
  std::string display() const { return value_ ? *value_ : "NO_ANSWER"; }

  friend bool operator==(const AnswerKey&, const AnswerKey&) = default;

 private:
  std::optional<std::string> value_;
};

/// Canonical answer form used for grouping and strict-match evaluation:
/// trim, lowercase, drop trailing punctuation, drop thousands separators in
/// numerals and a trailing ".0". An empty result maps to NO_ANSWER.
AnswerKey normalize_answer(std::string_view raw);

struct AssertionPair {
  std::string question_id;
  std::size_t path_index = 0;
  FeatureVector pos_features;
  FeatureVector neg_features;
  AnswerKey answer_key;
  std::optional<double> answer_confidence;
  std::optional<bool> gold_label;
};

struct AnswerGroup {
  AnswerKey key;
  std::vector<std::size_t> members;  // indices into QuestionInstance::pairs
};

/// All reasoning paths for one question, partitioned by final answer.
/// Construct through group_by_answer so the partition invariants hold.
struct QuestionInstance {
  std::string question_id;
  std::vector<AssertionPair> pairs;
  std::vector<AnswerGroup> groups;
  std::optional<AnswerKey> gold_answer;

  std::size_t path_count() const noexcept { return pairs.size(); }
  std::size_t group_count() const noexcept { return groups.size(); }
  std::size_t feature_dim() const noexcept {
    return pairs.empty() ? 0 : pairs.front().pos_features.dim();
  }
};

/// Groups paths by answer key. Real answers come first in lexicographic
/// order; NO_ANSWER paths follow as singletons in path-index order. Pairs
/// are sorted by path_index, which must run exactly 0..N-1; members are
/// positions in `pairs`.
QuestionInstance group_by_answer(std::vector<AssertionPair> pairs,
                                 std::optional<AnswerKey> gold_answer = std::nullopt);

/// Checks every partition and dimension invariant; throws on violation.
void validate_instance(const QuestionInstance& instance);

std::size_t dataset_feature_dim(std::span<const QuestionInstance> dataset);

enum class InterVariant { SoftProb, TNorm };
enum class NormalizationMode { None, PerTemplateCenterScale };

std::string_view to_string(InterVariant v) noexcept;
std::string_view to_string(NormalizationMode m) noexcept;
InterVariant parse_inter_variant(std::string_view s);
NormalizationMode parse_normalization_mode(std::string_view s);

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_steps = 2000;
  std::size_t batch_questions = 32;
  double w_nega = 1.0;
  double w_intra = 1.0;
  double w_inter = 1.0;
  // Split of the negation term: L_nega = w_sum * L_sum + w_diff * L_diff.
  double w_sum = 1.0;
  double w_diff = 1.0;
  InterVariant inter_variant = InterVariant::SoftProb;
  // Soft inter-group loss only: include the entropy regularizer on the
  // normalized representative distribution.
  bool inter_entropy = true;
  NormalizationMode normalization = NormalizationMode::PerTemplateCenterScale;
  std::uint64_t rng_seed = 0;
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 64;

  /// Throws InvalidConfig on out-of-range values.
  void validate() const;
};

}  // namespace latver
