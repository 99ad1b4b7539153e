#pragma once

// Exhaustive enumeration of small selection instances: every answer labeling
// over {a, b, c, NO_ANSWER} and every per-path value drawn from a grid.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "latver/inference.hpp"
#include "oracles.hpp"

namespace selection_enum {

struct Tally {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  std::string first_failure;
};

inline latver::QuestionInstance build(const std::vector<std::optional<std::string>>& answers,
                                      const std::vector<double>& confidence) {
  std::vector<latver::AssertionPair> pairs;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    latver::AssertionPair p;
    p.question_id = "enum";
    p.path_index = i;
    p.pos_features = latver::FeatureVector({0.0f});
    p.neg_features = latver::FeatureVector({0.0f});
    p.answer_key = answers[i] ? latver::AnswerKey(*answers[i]) : latver::AnswerKey::none();
    p.answer_confidence = confidence[i];
    pairs.push_back(std::move(p));
  }
  return latver::group_by_answer(std::move(pairs));
}

inline std::optional<std::string> as_optional(const latver::AnswerKey& k) {
  if (k.is_none()) return std::nullopt;
  return k.str();
}

inline std::string describe(const std::vector<std::optional<std::string>>& answers,
                            const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    s += (answers[i] ? *answers[i] : std::string("-")) + ":" + std::to_string(values[i]) + " ";
  }
  return s;
}

// Runs select_answer (max, sum), majority_vote and cot_decoding_select (max,
// sum) against the brute-force winner for every instance with 1..max_paths
// paths. Each (labeling, values) combination counts as one case.
inline Tally run(std::size_t max_paths, const std::vector<double>& grid) {
  const std::vector<std::optional<std::string>> labels = {"a", "b", "c", std::nullopt};
  Tally t;
  auto record = [&](bool ok, const char* what, const std::vector<std::optional<std::string>>& a,
                    const std::vector<double>& v) {
    if (ok) return;
    ++t.mismatches;
    if (t.first_failure.empty()) t.first_failure = std::string(what) + " on " + describe(a, v);
  };

  for (std::size_t n = 1; n <= max_paths; ++n) {
    std::size_t label_combos = 1, value_combos = 1;
    for (std::size_t i = 0; i < n; ++i) {
      label_combos *= labels.size();
      value_combos *= grid.size();
    }
    for (std::size_t lc = 0; lc < label_combos; ++lc) {
      std::vector<std::optional<std::string>> answers(n);
      for (std::size_t i = 0, x = lc; i < n; ++i, x /= labels.size()) answers[i] = labels[x % labels.size()];
      const std::vector<double> ones(n, 1.0);
      const auto vote_expect = oracle::brute_force_winner(oracle::aggregate(answers, ones, false));

      for (std::size_t vc = 0; vc < value_combos; ++vc) {
        std::vector<double> values(n);
        for (std::size_t i = 0, x = vc; i < n; ++i, x /= grid.size()) values[i] = grid[x % grid.size()];
        const latver::QuestionInstance inst = build(answers, values);
        std::vector<latver::PathScore> scores;
        for (std::size_t i = 0; i < n; ++i) scores.push_back({i, 0.5, 0.5, values[i]});

        const auto max_expect = oracle::brute_force_winner(oracle::aggregate(answers, values, true));
        const auto sum_expect = oracle::brute_force_winner(oracle::aggregate(answers, values, false));
        using latver::Strategy;
        record(as_optional(latver::select_answer(scores, inst, Strategy::Max).chosen_answer) == max_expect,
               "select_answer(max)", answers, values);
        record(as_optional(latver::select_answer(scores, inst, Strategy::Sum).chosen_answer) == sum_expect,
               "select_answer(sum)", answers, values);
        record(as_optional(latver::cot_decoding_select(inst, Strategy::Max).chosen_answer) == max_expect,
               "cot_decoding_select(max)", answers, values);
        record(as_optional(latver::cot_decoding_select(inst, Strategy::Sum).chosen_answer) == sum_expect,
               "cot_decoding_select(sum)", answers, values);
        record(as_optional(latver::majority_vote(inst).chosen_answer) == vote_expect, "majority_vote",
               answers, values);
        ++t.cases;
      }
    }
  }
  return t;
}

}  // namespace selection_enum
