#include "latver/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "latver/rng.hpp"

namespace latver {

namespace {

template <class A>
bool same_bits(const A& a, const A& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

template <class A>
bool all_finite(const A& a) {
  return a.allFinite();
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  // Row-major fill order: output unit by output unit.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = (2.0 * uniform_unit(rng) - 1.0) * bound;
    }
  }
}

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

}  // namespace

std::size_t VerifierModel::parameter_count() const noexcept {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1);
}

void VerifierModel::validate() const {
  if (w1.rows() < 1 || w1.cols() < 1 || w2.rows() < 1) {
    throw Error(ErrorKind::ShapeMismatch, "model widths must be positive");
  }
  if (b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows() ||
      w3.size() != w2.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "model layer shapes are inconsistent");
  }
  if (!all_finite(w1) || !all_finite(b1) || !all_finite(w2) || !all_finite(b2) ||
      !all_finite(w3) || !std::isfinite(b3)) {
    throw Error(ErrorKind::MalformedInput, "model has non-finite parameters");
  }
}

bool operator==(const VerifierModel& a, const VerifierModel& b) {
  return same_bits(a.w1, b.w1) && same_bits(a.b1, b.b1) && same_bits(a.w2, b.w2) &&
         same_bits(a.b2, b.b2) && same_bits(a.w3, b.w3) &&
         std::memcmp(&a.b3, &b.b3, sizeof(double)) == 0;
}

GradientSet GradientSet::zeros_like(const VerifierModel& model) {
  GradientSet g;
  g.w1 = Matrix::Zero(model.w1.rows(), model.w1.cols());
  g.b1 = Vector::Zero(model.b1.size());
  g.w2 = Matrix::Zero(model.w2.rows(), model.w2.cols());
  g.b2 = Vector::Zero(model.b2.size());
  g.w3 = RowVector::Zero(model.w3.size());
  g.b3 = 0.0;
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& o) {
  if (w1.rows() != o.w1.rows() || w1.cols() != o.w1.cols() || w2.rows() != o.w2.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient shapes differ");
  }
  w1 += o.w1;
  b1 += o.b1;
  w2 += o.w2;
  b2 += o.b2;
  w3 += o.w3;
  b3 += o.b3;
  if (o.input.size() > 0) {
    if (input.size() == 0) {
      input = o.input;
    } else {
      input += o.input;
    }
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
  w3 *= s;
  b3 *= s;
  input *= s;
  return *this;
}

VerifierModel init_model(std::size_t d, std::size_t h1, std::size_t h2, std::uint64_t seed) {
  if (d < 1 || h1 < 1 || h2 < 1) {
    throw Error(ErrorKind::InvalidDims, "init_model: widths must be >= 1 (got d=" +
                                            std::to_string(d) + ", h1=" + std::to_string(h1) +
                                            ", h2=" + std::to_string(h2) + ")");
  }
  const auto di = static_cast<Eigen::Index>(d);
  const auto h1i = static_cast<Eigen::Index>(h1);
  const auto h2i = static_cast<Eigen::Index>(h2);
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));

  VerifierModel m;
  m.w1.resize(h1i, di);
  m.w2.resize(h2i, h1i);
  Matrix w3(1, h2i);
  fill_uniform(m.w1, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  fill_uniform(m.w2, 1.0 / std::sqrt(static_cast<double>(h1)), rng);
  fill_uniform(w3, 1.0 / std::sqrt(static_cast<double>(h2)), rng);
  m.w3 = w3.row(0);
  m.b1 = Vector::Zero(h1i);
  m.b2 = Vector::Zero(h2i);
  m.b3 = 0.0;
  return m;
}

double sigmoid_clamped(double logit) noexcept {
  const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector to_vector(const FeatureVector& x) {
  Vector v(static_cast<Eigen::Index>(x.dim()));
  const auto vals = x.values();
  for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
  return v;
}

ForwardTrace forward(const VerifierModel& model, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
    throw Error(ErrorKind::DimMismatch, "forward: input dim " + std::to_string(x.size()) +
                                            " != model dim " + std::to_string(model.input_dim()));
  }
  ForwardTrace t;
  t.input = x;
  t.pre1 = model.w1 * x + model.b1;
  t.act1 = t.pre1.unaryExpr([](double v) { return relu(v); });
  t.pre2 = model.w2 * t.act1 + model.b2;
  t.act2 = t.pre2.unaryExpr([](double v) { return relu(v); });
  t.logit = model.w3.dot(t.act2) + model.b3;
  t.p = sigmoid_clamped(t.logit);
  return t;
}

ForwardTrace forward(const VerifierModel& model, const FeatureVector& x) {
  return forward(model, to_vector(x));
}

namespace {

// dp/dlogit through the clamp; zero where the clamp is active.
inline double sigmoid_grad(double logit, double p) noexcept {
  if (logit < -kLogitClamp || logit > kLogitClamp) return 0.0;
  return p * (1.0 - p);
}

}  // namespace

GradientSet backward(const VerifierModel& model, const ForwardTrace& t, double dl_dp) {
  if (static_cast<std::size_t>(t.input.size()) != model.input_dim() ||
      static_cast<std::size_t>(t.pre1.size()) != model.hidden1() ||
      static_cast<std::size_t>(t.pre2.size()) != model.hidden2() ||
      t.act1.size() != t.pre1.size() || t.act2.size() != t.pre2.size()) {
    throw Error(ErrorKind::StaleTrace, "backward: trace shapes do not match the model");
  }
  GradientSet g;
  const double dlogit = dl_dp * sigmoid_grad(t.logit, t.p);
  g.w3 = dlogit * t.act2.transpose();
  g.b3 = dlogit;
  const Vector dpre2 =
      (model.w3.transpose() * dlogit).cwiseProduct(
          t.pre2.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  g.w2 = dpre2 * t.act1.transpose();
  g.b2 = dpre2;
  const Vector dpre1 = (model.w2.transpose() * dpre2)
                           .cwiseProduct(t.pre1.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  g.w1 = dpre1 * t.input.transpose();
  g.b1 = dpre1;
  g.input = model.w1.transpose() * dpre1;
  return g;
}

BatchTrace forward_batch(const VerifierModel& model, Matrix inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != model.input_dim()) {
    throw Error(ErrorKind::DimMismatch, "forward_batch: input dim " +
                                            std::to_string(inputs.rows()) + " != model dim " +
                                            std::to_string(model.input_dim()));
  }
  BatchTrace t;
  t.input = std::move(inputs);
  t.pre1.noalias() = model.w1 * t.input;
  t.pre1.colwise() += model.b1;
  t.act1 = t.pre1.cwiseMax(0.0);
  t.pre2.noalias() = model.w2 * t.act1;
  t.pre2.colwise() += model.b2;
  t.act2 = t.pre2.cwiseMax(0.0);
  t.logit.noalias() = model.w3 * t.act2;
  t.logit.array() += model.b3;
  t.p = t.logit.unaryExpr([](double z) { return sigmoid_clamped(z); });
  return t;
}

GradientSet backward_batch(const VerifierModel& model, const BatchTrace& t, const RowVector& dl_dp) {
  const Eigen::Index b = t.input.cols();
  if (dl_dp.size() != b || t.pre1.rows() != model.w1.rows() || t.pre2.rows() != model.w2.rows() ||
      t.input.rows() != model.w1.cols()) {
    throw Error(ErrorKind::StaleTrace, "backward_batch: trace shapes do not match the model");
  }
  RowVector dlogit(b);
  for (Eigen::Index i = 0; i < b; ++i) dlogit(i) = dl_dp(i) * sigmoid_grad(t.logit(i), t.p(i));

  GradientSet g;
  g.w3.noalias() = dlogit * t.act2.transpose();
  g.b3 = dlogit.sum();
  Matrix dpre2 = model.w3.transpose() * dlogit;
  dpre2.array() *= (t.pre2.array() > 0.0).cast<double>();
  g.w2.noalias() = dpre2 * t.act1.transpose();
  g.b2 = dpre2.rowwise().sum();
  Matrix dpre1(model.w1.rows(), b);
  dpre1.noalias() = model.w2.transpose() * dpre2;
  dpre1.array() *= (t.pre1.array() > 0.0).cast<double>();
  g.w1.noalias() = dpre1 * t.input.transpose();
  g.b1 = dpre1.rowwise().sum();
  return g;
}

RowVector predict_batch(const VerifierModel& model, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != model.input_dim()) {
    throw Error(ErrorKind::DimMismatch, "predict_batch: input dim mismatch");
  }
  Matrix h1 = model.w1 * inputs;
  h1.colwise() += model.b1;
  h1 = h1.cwiseMax(0.0);
  Matrix h2 = model.w2 * h1;
  h2.colwise() += model.b2;
  h2 = h2.cwiseMax(0.0);
  RowVector logit = model.w3 * h2;
  logit.array() += model.b3;
  return logit.unaryExpr([](double z) { return sigmoid_clamped(z); });
}

}  // namespace latver
