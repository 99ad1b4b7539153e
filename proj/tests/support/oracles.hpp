#pragma once

// Straightforward scalar reimplementations used as independent references.
// Nothing here calls into the library's loss or selection code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latver/model.hpp"
#include "latver/types.hpp"

namespace oracle {

inline double clamp_p(double p) { return std::clamp(p, 1e-7, 1.0 - 1e-7); }

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Triple loop over the stored weights.
inline double forward(const latver::VerifierModel& m, const std::vector<double>& x) {
  const auto h1 = static_cast<std::size_t>(m.w1.rows());
  const auto h2 = static_cast<std::size_t>(m.w2.rows());
  std::vector<double> a1(h1), a2(h2);
  for (std::size_t i = 0; i < h1; ++i) {
    double s = m.b1(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < x.size(); ++j) s += m.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
    a1[i] = relu(s);
  }
  for (std::size_t i = 0; i < h2; ++i) {
    double s = m.b2(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < h1; ++j) s += m.w2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * a1[j];
    a2[i] = relu(s);
  }
  double z = m.b3;
  for (std::size_t j = 0; j < h2; ++j) z += m.w3(static_cast<Eigen::Index>(j)) * a2[j];
  z = std::clamp(z, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-z));
}

inline double nega(const std::vector<double>& pos, const std::vector<double>& neg) {
  double total = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double s = pos[i] + neg[i] - 1.0;
    const double lo = pos[i] < neg[i] ? pos[i] : neg[i];
    total += s * s + lo * lo;
  }
  return total;
}

inline double intra(const std::vector<double>& pos, const std::vector<double>& neg,
                    const std::vector<std::vector<std::size_t>>& groups) {
  double total = 0.0;
  for (const auto& g : groups) {
    for (std::size_t a : g) {
      for (std::size_t b : g) {
        if (a == b) continue;
        total += (pos[a] - pos[b]) * (pos[a] - pos[b]);
        total += (neg[a] - neg[b]) * (neg[a] - neg[b]);
      }
    }
  }
  return total;
}

inline double entropy_of(const std::vector<double>& q) {
  double sum = 0.0;
  for (double v : q) sum += v;
  double h = 0.0;
  for (double v : q) {
    const double r = v / sum;
    if (r > 0.0) h -= r * std::log(r);
  }
  return h;
}

inline double inter_soft(const std::vector<double>& q) {
  double sum = 0.0;
  for (double v : q) sum += v;
  const double h = q.size() > 1 ? entropy_of(q) : 0.0;
  return (sum - 1.0) * (sum - 1.0) + h;
}

// 1 - P(exactly one true) written as the complement product of the
// "only k is true" terms: r = 1 - prod_k (1 - d_k).
inline double inter_tnorm(const std::vector<double>& q) {
  double not_any = 1.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    double d = q[k];
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (j != k) d *= 1.0 - q[j];
    }
    not_any *= 1.0 - d;
  }
  return not_any;
}

inline double bce(const std::vector<double>& pos, const std::vector<double>& neg,
                  const std::vector<bool>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double pp = clamp_p(pos[i]);
    const double pn = clamp_p(neg[i]);
    if (y[i]) {
      total += -std::log(pp) - std::log(1.0 - pn);
    } else {
      total += -std::log(1.0 - pp) - std::log(pn);
    }
  }
  return total;
}

// One candidate group as the brute-force selector sees it.
struct Candidate {
  std::optional<std::string> key;  // nullopt = NO_ANSWER
  std::size_t size = 0;
  double score = 0.0;
};

// True if a should be chosen over b.
inline bool beats(const Candidate& a, const Candidate& b) {
  if (a.key.has_value() != b.key.has_value()) return a.key.has_value();
  if (a.score != b.score) return a.score > b.score;
  if (a.size != b.size) return a.size > b.size;
  if (!a.key) return false;
  return *a.key < *b.key;
}

// Exhaustive: the winner is the candidate that no other candidate beats.
inline std::optional<std::string> brute_force_winner(const std::vector<Candidate>& cands) {
  for (std::size_t i = 0; i < cands.size(); ++i) {
    bool beaten = false;
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (i != j && beats(cands[j], cands[i])) beaten = true;
    }
    if (!beaten) return cands[i].key;
  }
  return std::nullopt;
}

// Aggregates per-path values over the answer labels directly, without the
// library's grouping. NO_ANSWER paths stay singletons.
inline std::vector<Candidate> aggregate(const std::vector<std::optional<std::string>>& answers,
                                        const std::vector<double>& values, bool use_max) {
  std::map<std::string, Candidate> by_key;
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (!answers[i]) {
      out.push_back({std::nullopt, 1, values[i]});
      continue;
    }
    auto [it, fresh] = by_key.try_emplace(*answers[i], Candidate{answers[i], 0, 0.0});
    Candidate& c = it->second;
    if (use_max) {
      c.score = fresh ? values[i] : std::max(c.score, values[i]);
    } else {
      c.score += values[i];
    }
    ++c.size;
  }
  for (auto& [k, c] : by_key) out.push_back(c);
  return out;
}

}  // namespace oracle
