#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "latver/model.hpp"
#include "latver/types.hpp"

namespace latver {

enum class Strategy { Max, Sum };

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view s);

struct PathScore {
  std::size_t path_index = 0;
  double p_pos = 0.5;
  double p_neg = 0.5;
  double score = 0.5;  // (p_pos + (1 - p_neg)) / 2
};

struct GroupScore {
  AnswerKey key;
  std::size_t size = 0;
  double score = 0.0;
};

struct SelectionResult {
  AnswerKey chosen_answer;  // NO_ANSWER only when every group is NO_ANSWER
  std::vector<GroupScore> group_scores;  // instance group order
  Strategy strategy = Strategy::Sum;
  std::vector<PathScore> per_path;
};

PathScore make_path_score(std::size_t index, double p_pos, double p_neg) noexcept;

/// Expects features already normalized with the training statistics.
std::vector<PathScore> score_paths(const VerifierModel& model, const QuestionInstance& instance);

/// Winner among candidate groups: highest score, then larger group, then the
/// lexicographically smaller key. NO_ANSWER groups win only if nothing else
/// exists. Returns an index into `groups`.
std::size_t pick_group(std::span<const GroupScore> groups);

SelectionResult select_answer(std::span<const PathScore> scores, const QuestionInstance& instance,
                              Strategy strategy);

SelectionResult majority_vote(const QuestionInstance& instance);

/// Throws MissingConfidence if any path lacks answer_confidence.
SelectionResult cot_decoding_select(const QuestionInstance& instance, Strategy strategy);

/// Answer of path 0, the top-1 first-token branch.
SelectionResult greedy_select(const QuestionInstance& instance);

struct EvalItem {
  SelectionResult result;
  std::optional<AnswerKey> gold;
};

struct Metrics {
  std::size_t questions = 0;
  std::size_t correct = 0;
  std::size_t gold_present = 0;
  double accuracy = 0.0;
  double p_at_n = 0.0;
};

bool is_correct(const SelectionResult& result, const std::optional<AnswerKey>& gold) noexcept;

Metrics evaluate(std::span<const EvalItem> items);

}  // namespace latver
