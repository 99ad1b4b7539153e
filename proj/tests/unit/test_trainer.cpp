#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "latver/error.hpp"
#include "latver/synthetic.hpp"
#include "latver/trainer.hpp"

using namespace latver;

namespace {

TrainConfig small_config(std::size_t steps) {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.max_steps = steps;
  c.batch_questions = 8;
  c.hidden1 = 16;
  c.hidden2 = 8;
  c.rng_seed = 3;
  return c;
}

std::vector<QuestionInstance> small_data(std::uint64_t seed = 1, double noise = 0.75) {
  SyntheticSpec s;
  s.dim = 8;
  s.questions = 40;
  s.paths_per_question = 6;
  s.noise_std = noise;
  s.rng_seed = seed;
  return generate(s);
}

// w1 and b3 carry the two toy parameters; everything else has zero gradient.
VerifierModel toy_model() {
  VerifierModel m = init_model(1, 1, 1, 0);
  m.w1(0, 0) = 0.5;
  m.b1.setZero();
  m.w2.setZero();
  m.b2.setZero();
  m.w3.setZero();
  m.b3 = -0.3;
  return m;
}

}  // namespace

TEST(AdamW, ZeroGradientNoDecayIsFixedPoint) {
  VerifierModel m = init_model(3, 4, 2, 1);
  const VerifierModel before = m;
  OptimizerState st = OptimizerState::zeros_like(m);
  TrainConfig c;
  c.weight_decay = 0.0;
  c.learning_rate = 0.1;
  for (int i = 0; i < 3; ++i) adamw_step(m, GradientSet::zeros_like(m), st, c);
  EXPECT_TRUE(m == before);
  EXPECT_EQ(st.step, 3u);
}

TEST(AdamW, ZeroGradientDecayScalesExactly) {
  VerifierModel m = init_model(3, 4, 2, 1);
  m.b1.setConstant(0.25);
  const VerifierModel before = m;
  OptimizerState st = OptimizerState::zeros_like(m);
  TrainConfig c;
  c.weight_decay = 0.01;
  c.learning_rate = 0.1;
  adamw_step(m, GradientSet::zeros_like(m), st, c);
  const double f = 1.0 - c.learning_rate * c.weight_decay;
  for (Eigen::Index i = 0; i < m.w1.size(); ++i) EXPECT_EQ(m.w1.data()[i], before.w1.data()[i] * f);
  for (Eigen::Index i = 0; i < m.b1.size(); ++i) EXPECT_EQ(m.b1(i), before.b1(i) * f);
  EXPECT_EQ(m.b3, before.b3 * f);
}

TEST(AdamW, FirstStepWithUnitGradient) {
  VerifierModel m = toy_model();
  OptimizerState st = OptimizerState::zeros_like(m);
  TrainConfig c;
  c.learning_rate = 0.1;
  c.weight_decay = 0.01;
  GradientSet g = GradientSet::zeros_like(m);
  g.w1(0, 0) = 1.0;
  adamw_step(m, g, st, c);
  const double expect = 0.5 - 0.1 * (1.0 / (1.0 + 1e-8)) - 0.1 * 0.01 * 0.5;
  EXPECT_NEAR(m.w1(0, 0), expect, 1e-15);
}

TEST(AdamW, ThreeStepReferenceTrace) {
  // Reference values stepped by hand in double precision.
  const double grads[3][2] = {{1.0, -2.0}, {0.5, 0.1}, {-0.25, 3.0}};
  const double expect[3][2] = {{0.399500001, -0.1997000005},
                               {0.30588253829716117, -0.13629605636334438},
                               {0.24921051895703253, -0.16220249010839435}};
  VerifierModel m = toy_model();
  OptimizerState st = OptimizerState::zeros_like(m);
  TrainConfig c;
  c.learning_rate = 0.1;
  c.weight_decay = 0.01;
  for (int t = 0; t < 3; ++t) {
    GradientSet g = GradientSet::zeros_like(m);
    g.w1(0, 0) = grads[t][0];
    g.b3 = grads[t][1];
    adamw_step(m, g, st, c);
    EXPECT_NEAR(m.w1(0, 0), expect[t][0], 1e-12) << "step " << t + 1;
    EXPECT_NEAR(m.b3, expect[t][1], 1e-12) << "step " << t + 1;
  }
  EXPECT_EQ(st.step, 3u);
}

TEST(AdamW, ShapeMismatch) {
  VerifierModel m = init_model(3, 4, 2, 1);
  OptimizerState st = OptimizerState::zeros_like(m);
  const GradientSet wrong = GradientSet::zeros_like(init_model(3, 5, 2, 1));
  try {
    adamw_step(m, wrong, st, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Train, ZeroStepsReturnsInitialization) {
  const auto data = small_data();
  const TrainConfig c = small_config(0);
  const auto init = init_model(8, 16, 8, c.rng_seed);
  EXPECT_TRUE(train(data, c).model == init);
  EXPECT_TRUE(train_supervised(data, c).model == init);
  EXPECT_TRUE(train(data, c).losses.empty());
}

TEST(Train, DeterministicAndSeedSensitive) {
  const auto data = small_data();
  const TrainConfig c = small_config(30);
  const auto a = train(data, c);
  const auto b = train(data, c);
  EXPECT_TRUE(a.model == b.model);
  EXPECT_TRUE(a.optimizer == b.optimizer);
  ASSERT_EQ(a.losses.size(), 30u);
  for (std::size_t i = 0; i < a.losses.size(); ++i) EXPECT_EQ(a.losses[i].total, b.losses[i].total);

  TrainConfig other = c;
  other.rng_seed = 4;
  EXPECT_FALSE(train(data, other).model == a.model);
}

TEST(Train, LossSeriesAndSanity) {
  const auto data = small_data();
  const auto r = train(data, small_config(200));
  ASSERT_EQ(r.losses.size(), 200u);
  EXPECT_EQ(r.losses.front().step, 1u);
  EXPECT_EQ(r.losses.back().step, 200u);
  EXPECT_EQ(r.optimizer.step, 200u);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    first += r.losses[i].total;
    last += r.losses[180 + i].total;
  }
  EXPECT_LE(last, first);
  for (const auto& s : r.losses) {
    EXPECT_NEAR(s.total, s.nega + s.intra + s.inter, 1e-12);
  }
}

TEST(Train, CallbackSeesEveryStep) {
  std::vector<std::size_t> seen;
  train(small_data(), small_config(5), [&](const StepRecord& s) { seen.push_back(s.step); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

TEST(Train, ZeroWeightMatchesOmittedTerm) {
  // With w_inter = 0 the inter term is never evaluated, so the choice of
  // variant cannot influence the trajectory.
  const auto data = small_data();
  TrainConfig a = small_config(25);
  a.w_inter = 0.0;
  TrainConfig b = a;
  b.inter_variant = InterVariant::TNorm;
  const auto ra = train(data, a);
  const auto rb = train(data, b);
  EXPECT_TRUE(ra.model == rb.model);
  for (const auto& s : ra.losses) EXPECT_EQ(s.inter, 0.0);
}

TEST(Train, Errors) {
  TrainConfig c = small_config(1);
  try {
    train({}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDataset);
  }

  auto data = small_data();
  data[3].pairs[2].gold_label.reset();
  try {
    train_supervised(data, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingLabels);
  }
  EXPECT_NO_THROW(train(data, c));

  c.learning_rate = 0.0;
  EXPECT_THROW(train(small_data(), c), Error);
}

TEST(Train, NonFiniteLossAborts) {
  TrainConfig c = small_config(50);
  c.learning_rate = 1e300;
  c.weight_decay = 1.0;
  try {
    train(small_data(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(TrainSupervised, SeparableLossDecreasesOverWindows) {
  const auto data = small_data(2, 0.0);
  TrainConfig c = small_config(500);
  const auto r = train_supervised(data, c);
  double previous = INFINITY;
  for (std::size_t w = 0; w < 10; ++w) {
    double mean = 0;
    for (std::size_t i = 0; i < 50; ++i) mean += r.losses[w * 50 + i].total;
    mean /= 50;
    EXPECT_LT(mean, previous) << "window " << w;
    previous = mean;
  }
}

TEST(TrainSupervised, FlipSymmetry) {
  const auto data = small_data(5);
  std::vector<QuestionInstance> flipped;
  for (const auto& q : data) {
    std::vector<AssertionPair> pairs = q.pairs;
    for (auto& p : pairs) {
      std::swap(p.pos_features, p.neg_features);
      p.gold_label = !*p.gold_label;
    }
    flipped.push_back(group_by_answer(std::move(pairs), q.gold_answer));
  }
  const TrainConfig c = small_config(60);
  const auto a = train_supervised(data, c);
  const auto b = train_supervised(flipped, c);
  ASSERT_EQ(a.losses.size(), b.losses.size());
  for (std::size_t i = 0; i < a.losses.size(); ++i) {
    EXPECT_NEAR(a.losses[i].total, b.losses[i].total, 1e-9 * std::abs(a.losses[i].total)) << i;
  }
}

TEST(SampleRepresentatives, DeterministicMembersAndVarying) {
  const auto data = small_data();
  const auto& q = data[0];
  const auto r1 = sample_representatives(q, 7, 3);
  EXPECT_EQ(r1, sample_representatives(q, 7, 3));
  ASSERT_EQ(r1.size(), q.groups.size());
  for (std::size_t k = 0; k < r1.size(); ++k) {
    const auto& m = q.groups[k].members;
    EXPECT_NE(std::find(m.begin(), m.end(), r1[k]), m.end());
  }
  std::set<std::vector<std::size_t>> distinct;
  for (std::uint64_t step = 1; step <= 50; ++step) distinct.insert(sample_representatives(q, 7, step));
  bool multi_member = false;
  for (const auto& g : q.groups) multi_member |= g.members.size() > 1;
  if (multi_member) EXPECT_GT(distinct.size(), 1u);
}
