#include "latver/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <string>

#include "latver/rng.hpp"

namespace latver {

OptimizerState OptimizerState::zeros_like(const VerifierModel& model) {
  return OptimizerState{GradientSet::zeros_like(model), GradientSet::zeros_like(model), 0};
}

namespace {

template <class A>
bool same_bits(const A& a, const A& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(const GradientSet& a, const GradientSet& b) {
  return same_bits(a.w1, b.w1) && same_bits(a.b1, b.b1) && same_bits(a.w2, b.w2) &&
         same_bits(a.b2, b.b2) && same_bits(a.w3, b.w3) &&
         std::memcmp(&a.b3, &b.b3, sizeof(double)) == 0;
}

bool shapes_match(const VerifierModel& m, const GradientSet& g) {
  return g.w1.rows() == m.w1.rows() && g.w1.cols() == m.w1.cols() && g.b1.size() == m.b1.size() &&
         g.w2.rows() == m.w2.rows() && g.w2.cols() == m.w2.cols() && g.b2.size() == m.b2.size() &&
         g.w3.size() == m.w3.size();
}

}  // namespace

bool operator==(const OptimizerState& a, const OptimizerState& b) {
  return a.step == b.step && same_bits(a.m, b.m) && same_bits(a.v, b.v);
}

void adamw_step(VerifierModel& model, const GradientSet& grads, OptimizerState& state,
                const TrainConfig& config) {
  if (!shapes_match(model, grads) || !shapes_match(model, state.m) || !shapes_match(model, state.v)) {
    throw Error(ErrorKind::ShapeMismatch, "adamw_step: gradient or moment shapes differ from model");
  }
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);
  const double lr = config.learning_rate;
  const double decay = 1.0 - lr * config.weight_decay;
  const double eps = config.adam_epsilon;

  // Moments live in GradientSet storage; walk all three in lockstep.
  double* ms[6] = {state.m.w1.data(), state.m.b1.data(), state.m.w2.data(),
                   state.m.b2.data(), state.m.w3.data(), &state.m.b3};
  double* vs[6] = {state.v.w1.data(), state.v.b1.data(), state.v.w2.data(),
                   state.v.b2.data(), state.v.w3.data(), &state.v.b3};
  std::size_t block = 0;
  for_each_parameter(model, grads, [&](double* theta, const double* g, std::size_t n) {
    double* m = ms[block];
    double* v = vs[block];
    ++block;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] = theta[i] * decay - lr * (m_hat / (std::sqrt(v_hat) + eps));
    }
  });
}

std::vector<std::size_t> sample_representatives(const QuestionInstance& instance,
                                                std::uint64_t seed, std::uint64_t step) {
  Rng rng(mix_seed(mix_seed(seed, step), fnv1a64(instance.question_id)));
  std::vector<std::size_t> reps;
  reps.reserve(instance.groups.size());
  for (const auto& g : instance.groups) reps.push_back(g.members[uniform_index(rng, g.members.size())]);
  return reps;
}

namespace {

enum class Objective { Unsupervised, Supervised };

// Epoch-wise shuffled question order, drawn without replacement.
class BatchSampler {
 public:
  BatchSampler(std::size_t count, std::uint64_t seed)
      : order_(count), rng_(mix_seed(seed, 0x6261746368ULL)) {
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle_range(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

TrainReport run_training(std::span<const QuestionInstance> raw, const TrainConfig& config,
                         Objective objective, const StepCallback& on_step) {
  config.validate();
  if (raw.empty()) throw Error(ErrorKind::EmptyDataset, "train: dataset is empty");
  const std::size_t dim = dataset_feature_dim(raw);
  if (objective == Objective::Supervised) {
    for (const auto& q : raw) {
      for (const auto& p : q.pairs) {
        if (!p.gold_label) {
          throw Error(ErrorKind::MissingLabels, "question '" + q.question_id + "' path " +
                                                    std::to_string(p.path_index) +
                                                    " has no gold label");
        }
      }
    }
  }

  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.config = config;
  report.seed = config.rng_seed;
  report.normalization = fit_normalization(raw, config.normalization);
  const std::vector<QuestionInstance> data = apply_normalization(raw, report.normalization);

  report.model = init_model(dim, config.hidden1, config.hidden2, config.rng_seed);
  report.optimizer = OptimizerState::zeros_like(report.model);
  report.losses.reserve(config.max_steps);

  BatchSampler sampler(data.size(), config.rng_seed);
  const std::size_t batch_size = std::min(config.batch_questions, data.size());
  const auto d = static_cast<Eigen::Index>(dim);

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    const std::vector<std::size_t> batch = sampler.next(batch_size);

    // Columns: for each question, its N positives then its N negatives.
    Eigen::Index cols = 0;
    for (std::size_t qi : batch) cols += static_cast<Eigen::Index>(2 * data[qi].path_count());
    Matrix inputs(d, cols);
    {
      Eigen::Index c = 0;
      for (std::size_t qi : batch) {
        for (const auto& p : data[qi].pairs) {
          inputs.col(c++) = Eigen::Map<const Eigen::VectorXf>(p.pos_features.values().data(), d).cast<double>();
        }
        for (const auto& p : data[qi].pairs) {
          inputs.col(c++) = Eigen::Map<const Eigen::VectorXf>(p.neg_features.values().data(), d).cast<double>();
        }
      }
    }

    const BatchTrace trace = forward_batch(report.model, std::move(inputs));
    if (!trace.p.allFinite()) {
      throw Error(ErrorKind::NonFiniteLoss,
                  "non-finite verifier output at step " + std::to_string(step));
    }
    RowVector dl_dp(cols);
    StepRecord record;
    record.step = step;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    Eigen::Index offset = 0;
    for (std::size_t qi : batch) {
      const QuestionInstance& q = data[qi];
      const std::size_t n = q.path_count();
      QuestionProbs probs;
      probs.pos.resize(n);
      probs.neg.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        probs.pos[i] = trace.p(offset + static_cast<Eigen::Index>(i));
        probs.neg[i] = trace.p(offset + static_cast<Eigen::Index>(n + i));
      }
      probs.groups.reserve(q.groups.size());
      for (const auto& g : q.groups) probs.groups.push_back(g.members);

      LossValue loss;
      if (objective == Objective::Supervised) {
        const std::unique_ptr<bool[]> labels(new bool[n]);
        for (std::size_t i = 0; i < n; ++i) labels[i] = *q.pairs[i].gold_label;
        loss = loss_supervised_bce(probs, std::span<const bool>(labels.get(), n));
        record.total += loss.value * inv_batch;
      } else {
        probs.representatives = sample_representatives(q, config.rng_seed, step);
        const LossBreakdown parts = total_loss(probs, config);
        loss = parts.total;
        record.total += parts.total.value * inv_batch;
        record.nega += parts.nega * inv_batch;
        record.intra += parts.intra * inv_batch;
        record.inter += parts.inter * inv_batch;
      }
      if (!std::isfinite(loss.value)) {
        throw Error(ErrorKind::NonFiniteLoss, "non-finite loss at step " + std::to_string(step) +
                                                  " (question '" + q.question_id + "')");
      }
      for (std::size_t i = 0; i < n; ++i) {
        dl_dp(offset + static_cast<Eigen::Index>(i)) = loss.d_pos[i] * inv_batch;
        dl_dp(offset + static_cast<Eigen::Index>(n + i)) = loss.d_neg[i] * inv_batch;
      }
      offset += static_cast<Eigen::Index>(2 * n);
    }

    const GradientSet grads = backward_batch(report.model, trace, dl_dp);
    adamw_step(report.model, grads, report.optimizer, config);
    report.losses.push_back(record);
    if (on_step) on_step(record);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace

TrainReport train(std::span<const QuestionInstance> dataset, const TrainConfig& config,
                  const StepCallback& on_step) {
  return run_training(dataset, config, Objective::Unsupervised, on_step);
}

TrainReport train_supervised(std::span<const QuestionInstance> dataset, const TrainConfig& config,
                             const StepCallback& on_step) {
  return run_training(dataset, config, Objective::Supervised, on_step);
}

}  // namespace latver
