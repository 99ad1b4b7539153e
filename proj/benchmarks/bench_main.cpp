#include <benchmark/benchmark.h>

#include <random>

#include "latver/inference.hpp"
#include "latver/losses.hpp"
#include "latver/model.hpp"
#include "latver/synthetic.hpp"
#include "latver/trainer.hpp"

using namespace latver;

namespace {

Matrix random_inputs(Eigen::Index d, Eigen::Index cols) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Matrix x(d, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

// One training batch: 32 questions x 10 paths x 2 assertions.
void BM_ForwardBatch(benchmark::State& state) {
  const auto model = init_model(64, state.range(0), state.range(1), 0);
  const Matrix x = random_inputs(64, 640);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(model, x));
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_ForwardBatch)->Args({256, 64})->Args({32, 16});

void BM_BackwardBatch(benchmark::State& state) {
  const auto model = init_model(64, state.range(0), state.range(1), 0);
  const auto trace = forward_batch(model, random_inputs(64, 640));
  const RowVector dl = RowVector::Constant(640, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(backward_batch(model, trace, dl));
  state.SetItemsProcessed(state.iterations() * 640);
}
BENCHMARK(BM_BackwardBatch)->Args({256, 64})->Args({32, 16});

QuestionProbs random_probs(std::size_t n, std::size_t m) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  QuestionProbs p;
  p.groups.assign(m, {});
  for (std::size_t i = 0; i < n; ++i) {
    p.pos.push_back(u(rng));
    p.neg.push_back(u(rng));
    p.groups[i % m].push_back(i);
  }
  for (const auto& g : p.groups) p.representatives.push_back(g.front());
  return p;
}

void BM_TotalLoss(benchmark::State& state) {
  const auto probs = random_probs(static_cast<std::size_t>(state.range(0)), 4);
  TrainConfig c;
  c.inter_variant = state.range(1) ? InterVariant::TNorm : InterVariant::SoftProb;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(probs, c));
}
BENCHMARK(BM_TotalLoss)->Args({10, 0})->Args({10, 1})->Args({64, 0});

// Includes normalization fitting and model init, so this is an upper bound per step.
void BM_TrainStep(benchmark::State& state) {
  SyntheticSpec s;
  s.questions = 64;
  const auto data = generate(s);
  TrainConfig c;
  c.max_steps = 1;
  c.learning_rate = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, c));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_SelectAnswer(benchmark::State& state) {
  SyntheticSpec s;
  s.questions = 1;
  s.dim = 2;
  s.paths_per_question = static_cast<std::size_t>(state.range(0));
  s.max_groups = s.paths_per_question - 1;
  const auto q = generate(s).front();
  std::vector<PathScore> scores;
  for (std::size_t i = 0; i < q.path_count(); ++i) scores.push_back(make_path_score(i, 0.1 * (i % 9), 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(select_answer(scores, q, Strategy::Sum));
}
BENCHMARK(BM_SelectAnswer)->Arg(10)->Arg(40);

void BM_ScorePaths(benchmark::State& state) {
  SyntheticSpec s;
  s.questions = 1;
  const auto q = generate(s).front();
  const auto model = init_model(64, 256, 64, 0);
  for (auto _ : state) benchmark::DoNotOptimize(score_paths(model, q));
}
BENCHMARK(BM_ScorePaths);

}  // namespace

BENCHMARK_MAIN();
