#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "latver/losses.hpp"
#include "latver/model.hpp"
#include "latver/normalization.hpp"
#include "latver/types.hpp"

namespace latver {

struct OptimizerState {
  GradientSet m;
  GradientSet v;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const VerifierModel& model);
  friend bool operator==(const OptimizerState& a, const OptimizerState& b);
};

/// Decoupled weight decay:
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
void adamw_step(VerifierModel& model, const GradientSet& grads, OptimizerState& state,
                const TrainConfig& config);

struct StepRecord {
  std::size_t step = 0;
  double total = 0.0;
  double nega = 0.0;
  double intra = 0.0;
  double inter = 0.0;
};

struct TrainReport {
  VerifierModel model;
  OptimizerState optimizer;
  NormalizationStats normalization;
  std::vector<StepRecord> losses;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  TrainConfig config;
};

/// Called after each optimizer step; used for streaming logs.
using StepCallback = std::function<void(const StepRecord&)>;

/// Unsupervised training on the consistency losses. Normalization stats are
/// fitted on `dataset` and returned so held-out data can reuse them.
TrainReport train(std::span<const QuestionInstance> dataset, const TrainConfig& config,
                  const StepCallback& on_step = {});

/// Same loop with the supervised BCE objective; every path needs gold_label.
TrainReport train_supervised(std::span<const QuestionInstance> dataset, const TrainConfig& config,
                             const StepCallback& on_step = {});

/// Representatives for one question at one step, drawn from a stream keyed
/// by (seed, step, question_id) so the draw does not depend on batch order.
std::vector<std::size_t> sample_representatives(const QuestionInstance& instance,
                                                std::uint64_t seed, std::uint64_t step);

}  // namespace latver
