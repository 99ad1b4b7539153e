#include "latver/inference.hpp"

#include <string>

namespace latver {

std::string_view to_string(Strategy s) noexcept { return s == Strategy::Max ? "max" : "sum"; }

Strategy parse_strategy(std::string_view s) {
  if (s == "max") return Strategy::Max;
  if (s == "sum") return Strategy::Sum;
  throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

PathScore make_path_score(std::size_t index, double p_pos, double p_neg) noexcept {
  return PathScore{index, p_pos, p_neg, 0.5 * (p_pos + (1.0 - p_neg))};
}

std::vector<PathScore> score_paths(const VerifierModel& model, const QuestionInstance& instance) {
  const std::size_t n = instance.path_count();
  const auto d = static_cast<Eigen::Index>(model.input_dim());
  if (instance.feature_dim() != model.input_dim()) {
    throw Error(ErrorKind::DimMismatch, "question '" + instance.question_id + "' has dim " +
                                            std::to_string(instance.feature_dim()) +
                                            ", model expects " + std::to_string(model.input_dim()));
  }
  Matrix inputs(d, static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = instance.pairs[i];
    inputs.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXf>(p.pos_features.values().data(), d).cast<double>();
    inputs.col(static_cast<Eigen::Index>(n + i)) =
        Eigen::Map<const Eigen::VectorXf>(p.neg_features.values().data(), d).cast<double>();
  }
  const RowVector probs = predict_batch(model, inputs);
  std::vector<PathScore> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_path_score(i, probs(static_cast<Eigen::Index>(i)),
                                  probs(static_cast<Eigen::Index>(n + i))));
  }
  return out;
}

namespace {

// True if a should be preferred over b.
bool better(const GroupScore& a, const GroupScore& b) {
  if (a.key.is_none() != b.key.is_none()) return b.key.is_none();
  if (a.score != b.score) return a.score > b.score;
  if (a.size != b.size) return a.size > b.size;
  if (a.key.is_none()) return false;  // both NO_ANSWER: keep the earlier one
  return a.key.str() < b.key.str();
}

SelectionResult finish(std::vector<GroupScore> groups, Strategy strategy,
                       std::vector<PathScore> per_path) {
  if (groups.empty()) throw Error(ErrorKind::EmptyScores, "no groups to select from");
  SelectionResult r;
  r.chosen_answer = groups[pick_group(groups)].key;
  r.group_scores = std::move(groups);
  r.strategy = strategy;
  r.per_path = std::move(per_path);
  return r;
}

std::vector<GroupScore> aggregate(const QuestionInstance& instance, std::span<const double> values,
                                  Strategy strategy) {
  std::vector<GroupScore> out;
  out.reserve(instance.groups.size());
  for (const auto& g : instance.groups) {
    GroupScore gs{g.key, g.members.size(), 0.0};
    bool first = true;
    for (std::size_t i : g.members) {
      const double v = values[i];
      if (strategy == Strategy::Sum) {
        gs.score += v;
      } else if (first || v > gs.score) {
        gs.score = v;
      }
      first = false;
    }
    out.push_back(std::move(gs));
  }
  return out;
}

}  // namespace

std::size_t pick_group(std::span<const GroupScore> groups) {
  if (groups.empty()) throw Error(ErrorKind::EmptyScores, "no groups to select from");
  std::size_t best = 0;
  for (std::size_t k = 1; k < groups.size(); ++k) {
    if (better(groups[k], groups[best])) best = k;
  }
  return best;
}

SelectionResult select_answer(std::span<const PathScore> scores, const QuestionInstance& instance,
                              Strategy strategy) {
  if (scores.empty()) throw Error(ErrorKind::EmptyScores, "select_answer: no path scores");
  const std::size_t n = instance.path_count();
  std::vector<double> values(n, 0.0);
  std::vector<char> covered(n, 0);
  for (const auto& s : scores) {
    if (s.path_index >= n) throw Error(ErrorKind::EmptyScores, "path score index out of range");
    values[s.path_index] = s.score;
    covered[s.path_index] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!covered[i]) {
      throw Error(ErrorKind::EmptyScores, "question '" + instance.question_id + "': path " +
                                              std::to_string(i) + " has no score");
    }
  }
  return finish(aggregate(instance, values, strategy), strategy,
                std::vector<PathScore>(scores.begin(), scores.end()));
}

SelectionResult majority_vote(const QuestionInstance& instance) {
  std::vector<GroupScore> groups;
  groups.reserve(instance.groups.size());
  for (const auto& g : instance.groups) {
    groups.push_back(GroupScore{g.key, g.members.size(), static_cast<double>(g.members.size())});
  }
  return finish(std::move(groups), Strategy::Sum, {});
}

SelectionResult cot_decoding_select(const QuestionInstance& instance, Strategy strategy) {
  std::vector<double> conf(instance.path_count());
  for (std::size_t i = 0; i < instance.path_count(); ++i) {
    const auto& c = instance.pairs[i].answer_confidence;
    if (!c) {
      throw Error(ErrorKind::MissingConfidence, "question '" + instance.question_id + "' path " +
                                                    std::to_string(i) + " has no answer confidence");
    }
    conf[i] = *c;
  }
  return finish(aggregate(instance, conf, strategy), strategy, {});
}

SelectionResult greedy_select(const QuestionInstance& instance) {
  if (instance.pairs.empty()) throw Error(ErrorKind::EmptyScores, "greedy_select: no paths");
  SelectionResult r;
  r.chosen_answer = instance.pairs.front().answer_key;
  r.strategy = Strategy::Max;
  for (const auto& g : instance.groups) {
    const bool has_first = !g.members.empty() && g.members.front() == 0;
    r.group_scores.push_back(GroupScore{g.key, g.members.size(), has_first ? 1.0 : 0.0});
  }
  return r;
}

bool is_correct(const SelectionResult& result, const std::optional<AnswerKey>& gold) noexcept {
  return gold && !gold->is_none() && result.chosen_answer == *gold;
}

Metrics evaluate(std::span<const EvalItem> items) {
  Metrics m;
  m.questions = items.size();
  for (const auto& item : items) {
    if (is_correct(item.result, item.gold)) ++m.correct;
    if (item.gold && !item.gold->is_none()) {
      for (const auto& g : item.result.group_scores) {
        if (g.key == *item.gold) {
          ++m.gold_present;
          break;
        }
      }
    }
  }
  if (m.questions > 0) {
    m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.questions);
    m.p_at_n = static_cast<double>(m.gold_present) / static_cast<double>(m.questions);
  }
  return m;
}

}  // namespace latver
