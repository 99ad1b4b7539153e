#include "latver/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace latver {

namespace {

inline double clamp_prob(double p) noexcept { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
inline bool clamp_active(double p) noexcept { return p < kProbClamp || p > 1.0 - kProbClamp; }

std::vector<double> representative_pos(const QuestionProbs& probs) {
  std::vector<double> q;
  q.reserve(probs.representatives.size());
  for (std::size_t a : probs.representatives) q.push_back(probs.pos[a]);
  return q;
}

}  // namespace

void QuestionProbs::validate() const {
  const std::size_t n = pos.size();
  if (n == 0 || neg.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, "QuestionProbs: pos/neg sizes differ or are empty");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pos[i] > 0.0 && pos[i] < 1.0 && neg[i] > 0.0 && neg[i] < 1.0)) {
      throw Error(ErrorKind::MalformedInput, "probability outside (0,1) at path " + std::to_string(i));
    }
  }
  if (representatives.size() != groups.size()) {
    throw Error(ErrorKind::ShapeMismatch, "need exactly one representative per group");
  }
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    if (std::find(g.begin(), g.end(), representatives[k]) == g.end()) {
      throw Error(ErrorKind::MalformedInput, "representative is not a member of its group");
    }
    for (std::size_t i : g) {
      if (i >= n) throw Error(ErrorKind::MalformedInput, "group member out of range");
    }
  }
}

LossValue LossValue::zeros(std::size_t n) {
  LossValue v;
  v.d_pos.assign(n, 0.0);
  v.d_neg.assign(n, 0.0);
  return v;
}

LossValue& LossValue::add_scaled(const LossValue& other, double w) {
  value += w * other.value;
  for (std::size_t i = 0; i < d_pos.size(); ++i) {
    d_pos[i] += w * other.d_pos[i];
    d_neg[i] += w * other.d_neg[i];
  }
  return *this;
}

LossValue loss_sum(const QuestionProbs& probs) {
  LossValue out = LossValue::zeros(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double r = probs.pos[i] + probs.neg[i] - 1.0;
    out.value += r * r;
    out.d_pos[i] = 2.0 * r;
    out.d_neg[i] = 2.0 * r;
  }
  return out;
}

LossValue loss_diff(const QuestionProbs& probs) {
  LossValue out = LossValue::zeros(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double a = probs.pos[i];
    const double b = probs.neg[i];
    if (a <= b) {
      out.value += a * a;
      out.d_pos[i] = 2.0 * a;
    } else {
      out.value += b * b;
      out.d_neg[i] = 2.0 * b;
    }
  }
  return out;
}

LossValue loss_nega(const QuestionProbs& probs) {
  LossValue out = loss_sum(probs);
  return out.add_scaled(loss_diff(probs), 1.0);
}

LossValue loss_intra(const QuestionProbs& probs) {
  LossValue out = LossValue::zeros(probs.size());
  for (const auto& g : probs.groups) {
    for (std::size_t i : g) {
      for (std::size_t j : g) {
        const double dp = probs.pos[i] - probs.pos[j];
        const double dn = probs.neg[i] - probs.neg[j];
        out.value += dp * dp + dn * dn;
        out.d_pos[i] += 2.0 * dp;
        out.d_pos[j] -= 2.0 * dp;
        out.d_neg[i] += 2.0 * dn;
        out.d_neg[j] -= 2.0 * dn;
      }
    }
  }
  return out;
}

LossValue loss_inter_sum(const QuestionProbs& probs) {
  LossValue out = LossValue::zeros(probs.size());
  double s = 0.0;
  for (std::size_t a : probs.representatives) s += probs.pos[a];
  const double r = s - 1.0;
  out.value = r * r;
  for (std::size_t a : probs.representatives) out.d_pos[a] = 2.0 * r;
  return out;
}

double representative_entropy(std::span<const double> q) {
  double s = 0.0;
  for (double v : q) s += clamp_prob(v);
  double h = 0.0;
  for (double v : q) {
    const double ph = clamp_prob(v) / s;
    h -= ph * std::log(ph);
  }
  return h;
}

LossValue loss_inter_entropy(const QuestionProbs& probs) {
  LossValue out = LossValue::zeros(probs.size());
  const std::vector<double> raw = representative_pos(probs);
  if (raw.size() <= 1) return out;  // H of a point mass; gradient is zero as well

  std::vector<double> q(raw.size());
  double s = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    q[k] = clamp_prob(raw[k]);
    s += q[k];
  }
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorKind::DegenerateDistribution, "representative probabilities sum to zero");
  }
  double h = 0.0;
  for (double v : q) {
    const double ph = v / s;
    h -= ph * std::log(ph);
  }
  out.value = h;
  // dH/dq_j = -(H + ln(q_j / S)) / S
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (clamp_active(raw[k])) continue;
    out.d_pos[probs.representatives[k]] = -(h + std::log(q[k] / s)) / s;
  }
  return out;
}

LossValue loss_inter_soft(const QuestionProbs& probs) {
  LossValue out = loss_inter_sum(probs);
  return out.add_scaled(loss_inter_entropy(probs), 1.0);
}

LossValue loss_inter_tnorm(const QuestionProbs& probs) {
  LossValue out = LossValue::zeros(probs.size());
  const std::vector<double> q = representative_pos(probs);
  const std::size_t m = q.size();

  // Disjunct k: q_k AND (NOT q_j for j != k).
  auto others_false = [&](std::size_t k, std::size_t skip) {
    double prod = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != k && j != skip) prod *= 1.0 - q[j];
    }
    return prod;
  };
  std::vector<double> d(m);
  for (std::size_t k = 0; k < m; ++k) d[k] = q[k] * others_false(k, k);

  double r = 0.0;
  for (double dk : d) r = r + dk - r * dk;
  out.value = 1.0 - r;

  // The fold satisfies 1 - r = prod_k (1 - d_k).
  std::vector<double> dloss_dd(m);
  for (std::size_t k = 0; k < m; ++k) {
    double prod = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != k) prod *= 1.0 - d[j];
    }
    dloss_dd[k] = -prod;
  }
  for (std::size_t j = 0; j < m; ++j) {
    double g = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double dd_dq = (k == j) ? others_false(k, k) : -q[k] * others_false(k, j);
      g += dloss_dd[k] * dd_dq;
    }
    out.d_pos[probs.representatives[j]] = g;
  }
  return out;
}

LossValue loss_supervised_bce(const QuestionProbs& probs, std::span<const bool> labels) {
  if (labels.size() != probs.size()) {
    throw Error(ErrorKind::MissingLabels, "expected " + std::to_string(probs.size()) +
                                              " labels, got " + std::to_string(labels.size()));
  }
  LossValue out = LossValue::zeros(probs.size());
  // -[t log p + (1 - t) log(1 - p)] with p clamped.
  auto term = [](double p_raw, bool target, double& grad) {
    const double p = clamp_prob(p_raw);
    const bool active = !clamp_active(p_raw);
    if (target) {
      grad = active ? -1.0 / p : 0.0;
      return -std::log(p);
    }
    grad = active ? 1.0 / (1.0 - p) : 0.0;
    return -std::log(1.0 - p);
  };
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out.value += term(probs.pos[i], labels[i], out.d_pos[i]);
    out.value += term(probs.neg[i], !labels[i], out.d_neg[i]);
  }
  return out;
}

LossBreakdown total_loss(const QuestionProbs& probs, const TrainConfig& config) {
  LossBreakdown out;
  out.total = LossValue::zeros(probs.size());
  if (config.w_nega != 0.0) {
    LossValue l;
    if (config.w_sum == 1.0 && config.w_diff == 1.0) {
      l = loss_nega(probs);
    } else {
      l = LossValue::zeros(probs.size());
      if (config.w_sum != 0.0) l.add_scaled(loss_sum(probs), config.w_sum);
      if (config.w_diff != 0.0) l.add_scaled(loss_diff(probs), config.w_diff);
    }
    out.nega = l.value;
    out.total.add_scaled(l, config.w_nega);
  }
  if (config.w_intra != 0.0) {
    const LossValue l = loss_intra(probs);
    out.intra = l.value;
    out.total.add_scaled(l, config.w_intra);
  }
  if (config.w_inter != 0.0) {
    LossValue l;
    if (config.inter_variant == InterVariant::TNorm) {
      l = loss_inter_tnorm(probs);
    } else if (config.inter_entropy) {
      l = loss_inter_soft(probs);
    } else {
      l = loss_inter_sum(probs);
    }
    out.inter = l.value;
    out.total.add_scaled(l, config.w_inter);
  }
  return out;
}

}  // namespace latver
