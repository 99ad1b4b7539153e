#include "latver/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "latver/inference.hpp"
#include "latver/normalization.hpp"
#include "latver/rng.hpp"

namespace latver {

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); };
  if (dim < 2) fail("dim must be >= 2");
  if (questions < 1) fail("questions must be >= 1");
  if (paths_per_question < 2) fail("paths_per_question must be >= 2");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std must be >= 0");
  if (!(truth_direction_norm >= 0.0) || !std::isfinite(truth_direction_norm)) {
    fail("truth_direction_norm must be >= 0");
  }
  if (!(template_offset_norm >= 0.0) || !std::isfinite(template_offset_norm)) {
    fail("template_offset_norm must be >= 0");
  }
  if (min_groups < 1 || min_groups > max_groups) fail("need 1 <= min_groups <= max_groups");
  if (!(minority_correct_rate >= 0.0 && minority_correct_rate <= 1.0)) {
    fail("minority_correct_rate must be in [0, 1]");
  }
  if (!(no_answer_rate >= 0.0 && no_answer_rate < 1.0)) fail("no_answer_rate must be in [0, 1)");
  if (!(confidence_truth_gap >= 0.0 && confidence_truth_gap <= 1.0)) {
    fail("confidence_truth_gap must be in [0, 1]");
  }
}

namespace {

std::vector<double> random_direction(std::size_t dim, double norm, Rng& rng) {
  std::vector<double> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = standard_normal(rng);
    sq += x * x;
  }
  const double scale = norm / std::sqrt(sq);
  for (auto& x : v) x *= scale;
  return v;
}

// Group sizes summing to n with a unique largest group whenever m >= 2.
std::vector<std::size_t> draw_group_sizes(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> sizes(m, 1);
  for (std::size_t r = m; r < n; ++r) ++sizes[uniform_index(rng, m)];
  if (m >= 2) {
    const std::size_t top = *std::max_element(sizes.begin(), sizes.end());
    std::vector<std::size_t> tied;
    for (std::size_t k = 0; k < m; ++k) {
      if (sizes[k] == top) tied.push_back(k);
    }
    if (tied.size() > 1) {
      // top >= 2 here because m <= n - 1; moving one path keeps every group nonempty.
      --sizes[tied[1]];
      ++sizes[tied[0]];
    }
  }
  return sizes;
}

}  // namespace

std::vector<QuestionInstance> generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.paths_per_question;
  const std::size_t d = spec.dim;
  Rng master(mix_seed(spec.rng_seed, 0x73796e7468ULL));
  const std::vector<double> truth = random_direction(d, spec.truth_direction_norm, master);
  const std::vector<double> offset = random_direction(d, spec.template_offset_norm, master);

  const std::size_t group_cap = std::max<std::size_t>(1, n - 1);
  const std::size_t lo = std::min(spec.min_groups, group_cap);
  const std::size_t hi = std::min(spec.max_groups, group_cap);

  std::vector<QuestionInstance> out;
  out.reserve(spec.questions);
  for (std::size_t q = 0; q < spec.questions; ++q) {
    Rng rng(mix_seed(spec.rng_seed, q + 1));
    char id[32];
    std::snprintf(id, sizeof id, "q%06zu", q);

    const std::size_t m = lo + uniform_index(rng, hi - lo + 1);
    const std::vector<std::size_t> sizes = draw_group_sizes(n, m, rng);
    const std::size_t largest =
        static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::size_t gold = largest;
    if (m >= 2 && uniform_unit(rng) < spec.minority_correct_rate) {
      gold = uniform_index(rng, m - 1);
      if (gold >= largest) ++gold;
    }

    std::vector<std::string> keys;
    std::set<long> used;
    while (keys.size() < m) {
      const long value = static_cast<long>(uniform_index(rng, 1000));
      if (used.insert(value).second) keys.push_back(std::to_string(value));
    }

    std::vector<std::size_t> assignment;
    for (std::size_t k = 0; k < m; ++k) assignment.insert(assignment.end(), sizes[k], k);
    shuffle_range(assignment.begin(), assignment.end(), rng);

    std::vector<AssertionPair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool y = assignment[i] == gold;
      const double s = y ? 1.0 : -1.0;
      std::vector<float> pos(d), neg(d);
      for (std::size_t j = 0; j < d; ++j) {
        pos[j] = static_cast<float>(offset[j] + s * truth[j] + spec.noise_std * standard_normal(rng));
      }
      for (std::size_t j = 0; j < d; ++j) {
        neg[j] = static_cast<float>(-offset[j] - s * truth[j] + spec.noise_std * standard_normal(rng));
      }
      const double conf = std::clamp(
          0.5 + 0.5 * spec.confidence_truth_gap * s + 0.15 * standard_normal(rng), 0.0, 1.0);
      const bool unparsed = !y && spec.no_answer_rate > 0.0 && uniform_unit(rng) < spec.no_answer_rate;

      AssertionPair p;
      p.question_id = id;
      p.path_index = i;
      p.pos_features = FeatureVector(std::move(pos));
      p.neg_features = FeatureVector(std::move(neg));
      p.answer_key = unparsed ? AnswerKey::none() : AnswerKey(keys[assignment[i]]);
      p.answer_confidence = conf;
      p.gold_label = y;
      pairs.push_back(std::move(p));
    }
    out.push_back(group_by_answer(std::move(pairs), AnswerKey(keys[gold])));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<QuestionInstance> dataset, std::size_t test_count) {
  if (test_count > dataset.size()) {
    throw Error(ErrorKind::InvalidArgument, "test split larger than dataset");
  }
  DatasetSplit split;
  const auto cut = dataset.end() - static_cast<std::ptrdiff_t>(test_count);
  split.test.assign(std::make_move_iterator(cut), std::make_move_iterator(dataset.end()));
  dataset.erase(cut, dataset.end());
  split.train = std::move(dataset);
  return split;
}

double selection_accuracy(const TrainReport& report, std::span<const QuestionInstance> test) {
  if (test.empty()) throw Error(ErrorKind::EmptyDataset, "selection_accuracy: empty test set");
  const std::vector<QuestionInstance> data = apply_normalization(test, report.normalization);
  std::size_t correct = 0;
  for (const auto& q : data) {
    const auto scores = score_paths(report.model, q);
    if (is_correct(select_answer(scores, q, Strategy::Sum), q.gold_answer)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double oracle_supervised_ceiling(const DatasetSplit& split, const TrainConfig& config) {
  const TrainReport report = train_supervised(split.train, config);
  return selection_accuracy(report, split.test);
}

}  // namespace latver
