#include "latver/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>

namespace latver {

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MixedQuestion: return "MixedQuestion";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::StaleTrace: return "StaleTrace";
    case ErrorKind::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyScores: return "EmptyScores";
    case ErrorKind::MissingConfidence: return "MissingConfidence";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InconsistentManifest: return "InconsistentManifest";
    case ErrorKind::BlobSizeMismatch: return "BlobSizeMismatch";
    case ErrorKind::BadRowIndex: return "BadRowIndex";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::ShapeCorruption: return "ShapeCorruption";
    case ErrorKind::MalformedInput: return "MalformedInput";
  }
  return "Unknown";
}

FeatureVector::FeatureVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorKind::MalformedInput, "feature vector must have positive dimension");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorKind::MalformedInput,
                  "non-finite feature value at index " + std::to_string(i));
    }
  }
}

const std::string& AnswerKey::str() const {
  if (!value_) throw Error(ErrorKind::InvalidArgument, "NO_ANSWER has no string value");
  return *value_;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Optional sign, digit groups separated by commas, optional fraction.
bool looks_numeric(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
  bool digits = false;
  bool seen_dot = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (is_digit(c)) {
      digits = true;
    } else if (c == ',' && !seen_dot) {
      if (i == 0 || !is_digit(s[i - 1]) || i + 1 >= s.size() || !is_digit(s[i + 1])) return false;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      return false;
    }
  }
  return digits;
}

std::string canonical_numeral(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != ',') out.push_back(c);
  }
  if (!out.empty() && out.front() == '+') out.erase(0, 1);
  if (const auto dot = out.find('.'); dot != std::string::npos) {
    while (out.size() > dot + 1 && out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  if (out.empty() || out == "-") out = "0";
  if (out == "-0") out = "0";
  return out;
}

}  // namespace

AnswerKey normalize_answer(std::string_view raw) {
  std::string_view s = trim(raw);
  std::string lowered;
  lowered.reserve(s.size());
  for (char c : s) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  std::string_view v = lowered;
  constexpr std::string_view kTrailing = ".,!?;:";
  for (;;) {
    v = trim(v);
    if (v.empty() || kTrailing.find(v.back()) == std::string_view::npos) break;
    v.remove_suffix(1);
  }
  if (v.empty()) return AnswerKey::none();
  if (looks_numeric(v)) return AnswerKey(canonical_numeral(v));
  return AnswerKey(std::string(v));
}

QuestionInstance group_by_answer(std::vector<AssertionPair> pairs,
                                 std::optional<AnswerKey> gold_answer) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "group_by_answer: no pairs");
  const std::string& qid = pairs.front().question_id;
  const std::size_t dim = pairs.front().pos_features.dim();
  for (const auto& p : pairs) {
    if (p.question_id != qid) {
      throw Error(ErrorKind::MixedQuestion,
                  "pairs mix question ids '" + qid + "' and '" + p.question_id + "'");
    }
    if (p.pos_features.dim() != dim || p.neg_features.dim() != dim) {
      throw Error(ErrorKind::DimMismatch, "question '" + qid + "': feature dims differ");
    }
  }

  std::sort(pairs.begin(), pairs.end(),
            [](const AssertionPair& a, const AssertionPair& b) { return a.path_index < b.path_index; });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].path_index != i) {
      throw Error(ErrorKind::MalformedInput,
                  "question '" + qid + "': path indices must be exactly 0..N-1");
    }
  }

  QuestionInstance inst;
  inst.question_id = qid;
  inst.gold_answer = std::move(gold_answer);

  std::map<std::string, std::vector<std::size_t>> by_key;
  std::vector<std::size_t> no_answer;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].answer_key.is_none()) {
      no_answer.push_back(i);
    } else {
      by_key[pairs[i].answer_key.str()].push_back(i);
    }
  }
  for (auto& [key, members] : by_key) {
    inst.groups.push_back(AnswerGroup{AnswerKey(key), std::move(members)});
  }
  for (std::size_t i : no_answer) inst.groups.push_back(AnswerGroup{AnswerKey::none(), {i}});

  inst.pairs = std::move(pairs);
  validate_instance(inst);
  return inst;
}

void validate_instance(const QuestionInstance& inst) {
  const std::size_t n = inst.pairs.size();
  if (n == 0) throw Error(ErrorKind::EmptyDataset, "question '" + inst.question_id + "' has no paths");
  if (inst.groups.empty() || inst.groups.size() > n) {
    throw Error(ErrorKind::MalformedInput, "question '" + inst.question_id + "': need 1 <= M <= N");
  }
  const std::size_t dim = inst.pairs.front().pos_features.dim();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = inst.pairs[i];
    if (p.question_id != inst.question_id) {
      throw Error(ErrorKind::MixedQuestion, "pair question id differs from instance");
    }
    if (p.path_index != i) {
      throw Error(ErrorKind::MalformedInput, "path_index does not match position");
    }
    if (p.pos_features.dim() != dim || p.neg_features.dim() != dim || dim == 0) {
      throw Error(ErrorKind::DimMismatch, "question '" + inst.question_id + "': feature dims differ");
    }
    if (p.answer_confidence &&
        (!std::isfinite(*p.answer_confidence) || *p.answer_confidence < 0.0)) {
      throw Error(ErrorKind::MalformedInput, "answer_confidence must be finite and >= 0");
    }
  }
  std::vector<int> seen(n, 0);
  for (const auto& g : inst.groups) {
    if (g.members.empty()) throw Error(ErrorKind::MalformedInput, "empty answer group");
    if (g.key.is_none() && g.members.size() != 1) {
      throw Error(ErrorKind::MalformedInput, "NO_ANSWER group must be a singleton");
    }
    for (std::size_t m : g.members) {
      if (m >= n || seen[m]++ != 0) {
        throw Error(ErrorKind::MalformedInput, "groups do not partition the paths");
      }
      if (!(inst.pairs[m].answer_key == g.key)) {
        throw Error(ErrorKind::MalformedInput, "group member answer differs from group key");
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorKind::MalformedInput, "groups do not cover every path");
  }
}

std::size_t dataset_feature_dim(std::span<const QuestionInstance> dataset) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "dataset is empty");
  const std::size_t dim = dataset.front().feature_dim();
  for (const auto& q : dataset) {
    if (q.feature_dim() != dim) {
      throw Error(ErrorKind::DimMismatch, "question '" + q.question_id + "' has dim " +
                                              std::to_string(q.feature_dim()) + ", expected " +
                                              std::to_string(dim));
    }
  }
  return dim;
}

std::string_view to_string(InterVariant v) noexcept {
  return v == InterVariant::SoftProb ? "soft_prob" : "t_norm";
}

std::string_view to_string(NormalizationMode m) noexcept {
  return m == NormalizationMode::None ? "none" : "per_template_center_scale";
}

InterVariant parse_inter_variant(std::string_view s) {
  if (s == "soft_prob") return InterVariant::SoftProb;
  if (s == "t_norm") return InterVariant::TNorm;
  throw Error(ErrorKind::InvalidArgument, "unknown inter variant '" + std::string(s) + "'");
}

NormalizationMode parse_normalization_mode(std::string_view s) {
  if (s == "none") return NormalizationMode::None;
  if (s == "per_template_center_scale") return NormalizationMode::PerTemplateCenterScale;
  throw Error(ErrorKind::InvalidArgument, "unknown normalization mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  if (!(w_nega >= 0.0 && w_intra >= 0.0 && w_inter >= 0.0)) fail("loss weights must be >= 0");
  if (!(w_sum >= 0.0 && w_diff >= 0.0)) fail("negation sub-weights must be >= 0");
  const bool nega_active = w_nega > 0.0 && (w_sum > 0.0 || w_diff > 0.0);
  if (!nega_active && w_intra == 0.0 && w_inter == 0.0) fail("loss weights must not all be zero");
  if (batch_questions == 0) fail("batch_questions must be >= 1");
  if (hidden1 == 0 || hidden2 == 0) fail("hidden widths must be >= 1");
}

}  // namespace latver
