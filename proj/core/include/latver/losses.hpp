#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latver/types.hpp"

namespace latver {

inline constexpr double kProbClamp = 1e-7;

/// Verifier outputs for one question plus the inter-group representatives.
struct QuestionProbs {
  std::vector<double> pos;  // p(z_i^+)
  std::vector<double> neg;  // p(z_i^-)
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> representatives;  // one member per group

  std::size_t size() const noexcept { return pos.size(); }
  void validate() const;
};

/// Scalar loss with its partial derivatives w.r.t. every pos/neg probability.
struct LossValue {
  double value = 0.0;
  std::vector<double> d_pos;
  std::vector<double> d_neg;

  static LossValue zeros(std::size_t n);
  LossValue& add_scaled(const LossValue& other, double w);
};

/// Component values reported alongside the weighted total.
struct LossBreakdown {
  LossValue total;
  double nega = 0.0;
  double intra = 0.0;
  double inter = 0.0;
};

/// sum_i (p+ + p- - 1)^2
LossValue loss_sum(const QuestionProbs& probs);
/// sum_i min(p+, p-)^2; a tie routes the gradient to p+.
LossValue loss_diff(const QuestionProbs& probs);
LossValue loss_nega(const QuestionProbs& probs);

/// Ordered-pair squared differences within each group, for p+ and p-.
LossValue loss_intra(const QuestionProbs& probs);

/// (sum_k q_k - 1)^2 over representative positives q_k.
LossValue loss_inter_sum(const QuestionProbs& probs);
/// Shannon entropy (nats) of q_k / sum_j q_j.
LossValue loss_inter_entropy(const QuestionProbs& probs);
LossValue loss_inter_soft(const QuestionProbs& probs);

/// 1 - truth of "exactly one representative is true" under product t-norm,
/// with a OR b = a + b - ab folded left to right.
LossValue loss_inter_tnorm(const QuestionProbs& probs);

/// Positive assertion trained toward the label, negative toward its flip.
LossValue loss_supervised_bce(const QuestionProbs& probs, std::span<const bool> labels);

LossBreakdown total_loss(const QuestionProbs& probs, const TrainConfig& config);

/// Entropy of the normalized representative distribution (for diagnostics).
double representative_entropy(std::span<const double> q);

}  // namespace latver
