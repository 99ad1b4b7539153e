#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "latver/error.hpp"
#include "latver/losses.hpp"
#include "oracles.hpp"

using namespace latver;

namespace {

constexpr double kTiny = 1e-9;

QuestionProbs make_probs(std::vector<double> pos, std::vector<double> neg,
                         std::vector<std::vector<std::size_t>> groups = {},
                         std::vector<std::size_t> reps = {}) {
  QuestionProbs p;
  p.pos = std::move(pos);
  p.neg = std::move(neg);
  if (groups.empty()) {
    for (std::size_t i = 0; i < p.pos.size(); ++i) groups.push_back({i});
  }
  if (reps.empty()) {
    for (const auto& g : groups) reps.push_back(g.front());
  }
  p.groups = std::move(groups);
  p.representatives = std::move(reps);
  return p;
}

std::vector<double> rep_values(const QuestionProbs& p) {
  std::vector<double> q;
  for (std::size_t a : p.representatives) q.push_back(p.pos[a]);
  return q;
}

QuestionProbs random_probs(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> pos(n), neg(n);
  for (auto& v : pos) v = u(rng);
  for (auto& v : neg) v = u(rng);
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) owner[i] = i < m ? i : rng() % m;
  std::shuffle(owner.begin(), owner.end(), rng);
  std::vector<std::vector<std::size_t>> groups(m);
  for (std::size_t i = 0; i < n; ++i) groups[owner[i]].push_back(i);
  std::vector<std::size_t> reps;
  for (const auto& g : groups) reps.push_back(g[rng() % g.size()]);
  return make_probs(pos, neg, groups, reps);
}

using Scalar = std::function<double(const QuestionProbs&)>;

// Central differences of `f` against the analytic partials in `l`.
void expect_fd_match(const QuestionProbs& probs, const LossValue& l, const Scalar& f,
                     const char* what) {
  const double eps = 1e-6;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (int side = 0; side < 2; ++side) {
      QuestionProbs up = probs, down = probs;
      (side == 0 ? up.pos : up.neg)[i] += eps;
      (side == 0 ? down.pos : down.neg)[i] -= eps;
      const double fd = (f(up) - f(down)) / (2 * eps);
      const double g = side == 0 ? l.d_pos[i] : l.d_neg[i];
      EXPECT_NEAR(g, fd, 1e-6 * std::max(1.0, std::abs(g))) << what << " index " << i << " side " << side;
    }
  }
}

}  // namespace

TEST(LossNega, Examples) {
  EXPECT_NEAR(loss_nega(make_probs({1 - kTiny}, {kTiny})).value, 0.0, 1e-8);

  const auto half = make_probs({0.5}, {0.5});
  EXPECT_DOUBLE_EQ(loss_sum(half).value, 0.0);
  EXPECT_DOUBLE_EQ(loss_diff(half).value, 0.25);
  EXPECT_DOUBLE_EQ(loss_nega(half).value, 0.25);

  const auto two = make_probs({0.9, 0.2}, {0.3, 0.2});
  EXPECT_NEAR(loss_sum(two).value, 0.4, 1e-12);
  EXPECT_NEAR(loss_diff(two).value, 0.13, 1e-12);
  EXPECT_NEAR(loss_nega(two).value, 0.53, 1e-12);
  EXPECT_NEAR(loss_nega(two).value, oracle::nega(two.pos, two.neg), 1e-14);
}

TEST(LossNega, TieRoutesGradientToPositive) {
  const auto l = loss_diff(make_probs({0.3}, {0.3}));
  EXPECT_DOUBLE_EQ(l.d_pos[0], 0.6);
  EXPECT_DOUBLE_EQ(l.d_neg[0], 0.0);
}

TEST(LossIntra, Examples) {
  EXPECT_DOUBLE_EQ(loss_intra(make_probs({0.4, 0.4, 0.9}, {0.2, 0.2, 0.1}, {{0, 1}, {2}})).value, 0.0);

  const auto one = make_probs({0.8, 0.6}, {0.3, 0.3}, {{0, 1}});
  EXPECT_NEAR(loss_intra(one).value, 0.08, 1e-12);
  EXPECT_NEAR(loss_intra(one).value, oracle::intra(one.pos, one.neg, one.groups), 1e-15);

  EXPECT_DOUBLE_EQ(loss_intra(make_probs({0.1, 0.7, 0.4}, {0.9, 0.3, 0.5})).value, 0.0);
}

TEST(LossInterSoft, Examples) {
  EXPECT_NEAR(loss_inter_soft(make_probs({1 - kTiny}, {0.5})).value, 0.0, 1e-8);

  const auto two = make_probs({0.5, 0.5}, {0.5, 0.5});
  EXPECT_NEAR(loss_inter_sum(two).value, 0.0, 1e-15);
  EXPECT_NEAR(loss_inter_soft(two).value, std::log(2.0), 1e-12);

  const auto three = make_probs({0.7, 0.2, 0.1}, {0.5, 0.5, 0.5});
  const double h = -(0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1));
  EXPECT_NEAR(h, 0.8018, 5e-5);
  EXPECT_NEAR(loss_inter_sum(three).value, 0.0, 1e-15);
  EXPECT_NEAR(loss_inter_soft(three).value, h, 1e-12);
}

TEST(LossInterTNorm, Examples) {
  EXPECT_NEAR(loss_inter_tnorm(make_probs({1 - kTiny}, {0.5})).value, 0.0, 1e-8);
  EXPECT_NEAR(loss_inter_tnorm(make_probs({1 - kTiny, kTiny}, {0.5, 0.5})).value, 0.0, 1e-8);
  EXPECT_NEAR(loss_inter_tnorm(make_probs({0.5, 0.5}, {0.5, 0.5})).value, 0.5625, 1e-15);
}

TEST(LossBce, Examples) {
  const bool yes[] = {true};
  // The limit is approached up to the probability clamp.
  EXPECT_NEAR(loss_supervised_bce(make_probs({1 - kTiny}, {kTiny}), yes).value, 0.0, 4 * kProbClamp);
  EXPECT_NEAR(loss_supervised_bce(make_probs({0.5}, {0.5}), yes).value, 2 * std::log(2.0), 1e-12);

  const bool y[] = {true, false};
  const auto p = make_probs({0.9, 0.3}, {0.1, 0.7});
  const double expect = oracle::bce(p.pos, p.neg, {true, false});
  EXPECT_NEAR(loss_supervised_bce(p, y).value, expect, 1e-12);
  EXPECT_NEAR(expect, -2 * std::log(0.9) - 2 * std::log(0.7), 1e-12);
}

TEST(LossBce, LabelCountMismatch) {
  const bool y[] = {true};
  try {
    loss_supervised_bce(make_probs({0.5, 0.5}, {0.5, 0.5}), y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingLabels);
  }
}

TEST(LossBce, ClampRegionGradientIsZero) {
  const bool y[] = {false};
  const auto l = loss_supervised_bce(make_probs({1e-9}, {1 - 1e-9}), y);
  EXPECT_EQ(l.d_pos[0], 0.0);
  EXPECT_EQ(l.d_neg[0], 0.0);
  EXPECT_TRUE(std::isfinite(l.value));
}

TEST(TotalLoss, OnlyNegaEqualsLossNega) {
  std::mt19937_64 rng(5);
  const auto p = random_probs(rng, 5, 3);
  TrainConfig c;
  c.w_intra = 0;
  c.w_inter = 0;
  const auto t = total_loss(p, c).total;
  const auto n = loss_nega(p);
  EXPECT_EQ(t.value, n.value);
  EXPECT_EQ(t.d_pos, n.d_pos);
  EXPECT_EQ(t.d_neg, n.d_neg);
}

TEST(TotalLoss, ComponentSum) {
  // Two singleton groups with p+ = 0.5 and p- = 0.25: nega 2 * 0.125, intra 0,
  // inter sum term 0 and entropy ln 2.
  const auto p = make_probs({0.5, 0.5}, {0.25, 0.25});
  const auto b = total_loss(p, TrainConfig{});
  EXPECT_NEAR(b.nega, 0.25, 1e-15);
  EXPECT_NEAR(b.intra, 0.0, 1e-15);
  EXPECT_NEAR(b.inter, std::log(2.0), 1e-12);
  EXPECT_NEAR(b.total.value, 0.9431, 1e-4);
  EXPECT_NEAR(b.total.value, 0.25 + std::log(2.0), 1e-12);
}

TEST(TotalLoss, HomogeneousInWeights) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_probs(rng, 2 + rng() % 5, 2);
    TrainConfig c;
    c.w_nega = 0.3;
    c.w_intra = 1.7;
    c.w_inter = 0.9;
    const auto a = total_loss(p, c).total;
    c.w_nega *= 2;
    c.w_intra *= 2;
    c.w_inter *= 2;
    const auto b = total_loss(p, c).total;
    EXPECT_NEAR(b.value, 2 * a.value, 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(b.d_pos[i], 2 * a.d_pos[i], 1e-12);
      EXPECT_NEAR(b.d_neg[i], 2 * a.d_neg[i], 1e-12);
    }
  }
}

TEST(TotalLoss, ZeroWeightOmitsTermExactly) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_probs(rng, 6, 3);
    TrainConfig c;
    c.w_inter = 0;
    const auto t = total_loss(p, c);
    LossValue manual = LossValue::zeros(p.size());
    manual.add_scaled(loss_nega(p), 1.0);
    manual.add_scaled(loss_intra(p), 1.0);
    EXPECT_EQ(t.total.value, manual.value);
    EXPECT_EQ(t.total.d_pos, manual.d_pos);
    EXPECT_EQ(t.total.d_neg, manual.d_neg);
    EXPECT_EQ(t.inter, 0.0);
  }
}

TEST(TotalLoss, VariantSelection) {
  const auto p = make_probs({0.5, 0.5}, {0.5, 0.5});
  TrainConfig c;
  c.w_nega = 0;
  c.w_intra = 0;
  c.inter_variant = InterVariant::TNorm;
  EXPECT_NEAR(total_loss(p, c).total.value, 0.5625, 1e-15);
  c.inter_variant = InterVariant::SoftProb;
  c.inter_entropy = false;
  EXPECT_NEAR(total_loss(p, c).total.value, 0.0, 1e-15);
}

TEST(Losses, AgreeWithScalarOraclesAndFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const std::size_t m = 1 + rng() % std::min<std::size_t>(4, n);
    const auto p = random_probs(rng, n, m);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rng() % 2;
    std::unique_ptr<bool[]> yb(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) yb[i] = y[i];
    const std::span<const bool> labels(yb.get(), n);

    const Scalar nega = [](const QuestionProbs& q) { return oracle::nega(q.pos, q.neg); };
    const Scalar intra = [](const QuestionProbs& q) { return oracle::intra(q.pos, q.neg, q.groups); };
    const Scalar soft = [](const QuestionProbs& q) { return oracle::inter_soft(rep_values(q)); };
    const Scalar tnorm = [](const QuestionProbs& q) { return oracle::inter_tnorm(rep_values(q)); };
    const Scalar bce = [&](const QuestionProbs& q) { return oracle::bce(q.pos, q.neg, y); };

    const auto ln = loss_nega(p);
    const auto li = loss_intra(p);
    const auto ls = loss_inter_soft(p);
    const auto lt = loss_inter_tnorm(p);
    const auto lb = loss_supervised_bce(p, labels);
    EXPECT_NEAR(ln.value, nega(p), 1e-12);
    EXPECT_NEAR(li.value, intra(p), 1e-12);
    EXPECT_NEAR(ls.value, soft(p), 1e-12);
    EXPECT_NEAR(lt.value, tnorm(p), 1e-12);
    EXPECT_NEAR(lb.value, bce(p), 1e-12);

    bool tie = false;
    for (std::size_t i = 0; i < n; ++i) tie |= std::abs(p.pos[i] - p.neg[i]) < 1e-4;
    if (!tie) expect_fd_match(p, ln, nega, "nega");
    expect_fd_match(p, li, intra, "intra");
    expect_fd_match(p, ls, soft, "inter_soft");
    expect_fd_match(p, lt, tnorm, "inter_tnorm");
    expect_fd_match(p, lb, bce, "bce");
  }
}

TEST(Losses, InvariantToPathAndGroupRelabeling) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    const auto p = random_probs(rng, n, 1 + rng() % std::min<std::size_t>(4, n));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);  // new index of old path i is perm[i]

    QuestionProbs q = p;
    for (std::size_t i = 0; i < n; ++i) {
      q.pos[perm[i]] = p.pos[i];
      q.neg[perm[i]] = p.neg[i];
    }
    for (auto& g : q.groups) for (auto& i : g) i = perm[i];
    for (auto& r : q.representatives) r = perm[r];
    std::vector<std::size_t> gperm(q.groups.size());
    std::iota(gperm.begin(), gperm.end(), 0);
    std::shuffle(gperm.begin(), gperm.end(), rng);
    QuestionProbs q2 = q;
    for (std::size_t k = 0; k < gperm.size(); ++k) {
      q2.groups[k] = q.groups[gperm[k]];
      q2.representatives[k] = q.representatives[gperm[k]];
    }

    EXPECT_NEAR(loss_nega(q2).value, loss_nega(p).value, 1e-12);
    EXPECT_NEAR(loss_intra(q2).value, loss_intra(p).value, 1e-12);
    EXPECT_NEAR(loss_inter_soft(q2).value, loss_inter_soft(p).value, 1e-12);
    EXPECT_NEAR(loss_inter_tnorm(q2).value, loss_inter_tnorm(p).value, 1e-12);
  }
}

TEST(Losses, ZeroAtSatisfaction) {
  // Consistent, group-constant probabilities with exactly one true group.
  const double hi = 1 - kTiny;
  const auto p = make_probs({hi, hi, kTiny}, {kTiny, kTiny, hi}, {{0, 1}, {2}});
  EXPECT_NEAR(loss_nega(p).value, 0.0, 1e-8);
  EXPECT_NEAR(loss_intra(p).value, 0.0, 1e-15);
  EXPECT_NEAR(loss_inter_soft(p).value, 0.0, 1e-5);  // entropy residue of the clamp
  EXPECT_NEAR(loss_inter_tnorm(p).value, 0.0, 1e-8);

  // Two true groups violate the inter-group constraint.
  const auto bad = make_probs({hi, hi}, {kTiny, kTiny});
  EXPECT_GT(loss_inter_soft(bad).value, 0.5);
  EXPECT_GT(loss_inter_tnorm(bad).value, 0.99);
}

TEST(Losses, RepresentativeEntropyBounds) {
  const double u[] = {0.3, 0.3, 0.3};
  EXPECT_NEAR(representative_entropy(u), std::log(3.0), 1e-12);
  const double peaked[] = {0.9, 1e-9};
  EXPECT_LT(representative_entropy(peaked), 1e-5);
}
