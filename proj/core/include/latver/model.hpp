#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "latver/types.hpp"

namespace latver {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kLogitClamp = 30.0;

/// input(d) -> relu(h1) -> relu(h2) -> sigmoid(1).
struct VerifierModel {
  Matrix w1;  // h1 x d
  Vector b1;
  Matrix w2;  // h2 x h1
  Vector b2;
  RowVector w3;  // 1 x h2
  double b3 = 0.0;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden1() const noexcept { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden2() const noexcept { return static_cast<std::size_t>(w2.rows()); }
  std::size_t parameter_count() const noexcept;

  /// Throws ShapeMismatch or MalformedInput on inconsistent shapes/non-finite values.
  void validate() const;

  friend bool operator==(const VerifierModel& a, const VerifierModel& b);
};

/// Same layout as VerifierModel; also used for Adam moments.
struct GradientSet {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  RowVector w3;
  double b3 = 0.0;
  Vector input;  // dL/dx, filled by single-input backward only

  static GradientSet zeros_like(const VerifierModel& model);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
};

/// Visits (parameter, gradient) storage in a fixed order: w1 b1 w2 b2 w3 b3.
template <class Fn>
void for_each_parameter(VerifierModel& m, const GradientSet& g, Fn&& fn) {
  fn(m.w1.data(), g.w1.data(), static_cast<std::size_t>(m.w1.size()));
  fn(m.b1.data(), g.b1.data(), static_cast<std::size_t>(m.b1.size()));
  fn(m.w2.data(), g.w2.data(), static_cast<std::size_t>(m.w2.size()));
  fn(m.b2.data(), g.b2.data(), static_cast<std::size_t>(m.b2.size()));
  fn(m.w3.data(), g.w3.data(), static_cast<std::size_t>(m.w3.size()));
  fn(&m.b3, &g.b3, std::size_t{1});
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
VerifierModel init_model(std::size_t d, std::size_t h1, std::size_t h2, std::uint64_t seed);

struct ForwardTrace {
  Vector input;
  Vector pre1, act1;
  Vector pre2, act2;
  double logit = 0.0;  // pre-clamp
  double p = 0.5;
};

double sigmoid_clamped(double logit) noexcept;

ForwardTrace forward(const VerifierModel& model, const FeatureVector& x);
ForwardTrace forward(const VerifierModel& model, const Vector& x);

GradientSet backward(const VerifierModel& model, const ForwardTrace& trace, double dl_dp);

/// Column-batched variant used by the trainer: one column per assertion.
struct BatchTrace {
  Matrix input;  // d x B
  Matrix pre1, act1, pre2, act2;
  RowVector logit, p;
};

BatchTrace forward_batch(const VerifierModel& model, Matrix inputs);

/// Parameter gradients for sum_b dL/dp_b; does not fill GradientSet::input.
GradientSet backward_batch(const VerifierModel& model, const BatchTrace& trace,
                           const RowVector& dl_dp);

/// Probabilities only, no caching.
RowVector predict_batch(const VerifierModel& model, const Matrix& inputs);

Vector to_vector(const FeatureVector& x);

}  // namespace latver
