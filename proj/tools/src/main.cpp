// latver: synth, train, eval and baseline subcommands.
//
// Exit codes: 0 success, 1 domain error, 2 usage error. Failures print one
// line, "error: <Kind>: <message>".

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latver/dataset_io.hpp"
#include "latver/error.hpp"
#include "latver/inference.hpp"
#include "latver/normalization.hpp"
#include "latver/synthetic.hpp"
#include "latver/trainer.hpp"
#include "options.hpp"

namespace fs = std::filesystem;
using namespace latver;
using cli::json;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("LATVER_OUT_DIR");
  return env && *env ? env : "latver_out";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

void write_resolved(const fs::path& dir, const std::string& command, const cli::OptionSet& opts) {
  json j;
  j["command"] = command;
  j["options"] = opts.resolved();
  write_text(dir / "resolved_config.json", j.dump(2) + "\n");
}

json key_json(const AnswerKey& k) { return k.is_none() ? json(nullptr) : json(k.str()); }

// Held-out tail of a dataset, or all of it when count is 0.
std::vector<QuestionInstance> tail(std::vector<QuestionInstance> data, std::size_t count) {
  if (count == 0) return data;
  return split_dataset(std::move(data), count).test;
}

std::vector<QuestionInstance> head(std::vector<QuestionInstance> data, std::size_t held_out) {
  if (held_out == 0) return data;
  return split_dataset(std::move(data), held_out).train;
}

// Runs `select` on every question with `workers` threads and writes the
// records sorted by question_id, the metrics file and a one-line summary.
template <class Select>
void report(const fs::path& out, const std::string& strategy, const std::vector<QuestionInstance>& data,
            std::size_t workers, Select select) {
  std::vector<EvalItem> items(data.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < data.size();) {
      try {
        items[i] = {select(data[i]), data[i].gold_answer};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = data.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::max<std::size_t>(workers, 1); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].question_id < data[b].question_id; });
  std::string records;
  for (std::size_t i : order) {
    const auto& r = items[i].result;
    json rec;
    rec["question_id"] = data[i].question_id;
    rec["strategy"] = strategy;
    rec["chosen_answer"] = key_json(r.chosen_answer);
    json groups = json::array();
    for (const auto& g : r.group_scores) {
      groups.push_back({{"answer", key_json(g.key)}, {"size", g.size}, {"score", g.score}});
    }
    rec["group_scores"] = groups;
    rec["correct"] = items[i].gold ? json(is_correct(r, items[i].gold)) : json(nullptr);
    records += rec.dump() + "\n";
  }
  write_text(out / "eval_records.jsonl", records);

  const Metrics m = evaluate(items);
  json mj;
  mj["strategy"] = strategy;
  mj["questions"] = m.questions;
  mj["gold_present"] = m.gold_present;
  mj["correct"] = m.correct;
  mj["accuracy"] = m.accuracy;
  mj["p_at_n"] = m.p_at_n;
  write_text(out / "metrics.json", mj.dump(2) + "\n");
  std::printf("%s: accuracy %.4f (%zu/%zu), P@N %.4f\n", strategy.c_str(), m.accuracy, m.correct,
              m.gold_present, m.p_at_n);
}

struct SynthArgs {
  SyntheticSpec spec;
  std::string out = default_out_dir();
};

struct TrainArgs {
  TrainConfig config;
  std::string data, out = default_out_dir();
  std::string inter_variant = "soft_prob", normalization = "per_template_center_scale";
  std::size_t test_count = 0;
  bool supervised = false;
};

struct EvalArgs {
  std::string data, checkpoint, out = default_out_dir(), strategy = "sum";
  std::size_t test_count = 0, workers = 1;
};

struct BaselineArgs {
  std::string data, out = default_out_dir(), which = "voting";
  std::size_t test_count = 0, workers = 1;
};

void run_synth(const SynthArgs& a, const cli::OptionSet& opts) {
  a.spec.validate();
  const auto data = generate(a.spec);
  write_dataset(a.out, data, DatasetManifest{});
  write_resolved(a.out, "synth", opts);
  std::printf("wrote %zu questions to %s\n", data.size(), a.out.c_str());
}

void run_train(TrainArgs a, const cli::OptionSet& opts) {
  a.config.inter_variant = parse_inter_variant(a.inter_variant);
  a.config.normalization = parse_normalization_mode(a.normalization);
  a.config.validate();
  const auto data = head(read_dataset(a.data).first, a.test_count);
  fs::create_directories(a.out);
  write_resolved(a.out, "train", opts);

  std::ofstream log(fs::path(a.out) / "train_log.jsonl", std::ios::trunc);
  if (!log) throw Error(ErrorKind::IoError, "cannot write training log in " + a.out);
  auto on_step = [&](const StepRecord& s) {
    json j;
    j["step"] = s.step;
    j["L_total"] = s.total;
    j["L_nega"] = s.nega;
    j["L_intra"] = s.intra;
    j["L_inter"] = s.inter;
    log << j.dump() << "\n";
  };
  const TrainReport rep = a.supervised ? train_supervised(data, a.config, on_step) : train(data, a.config, on_step);
  log.flush();
  write_checkpoint(fs::path(a.out) / "model.ckpt", Checkpoint{rep.model, rep.optimizer, rep.normalization});
  const double last = rep.losses.empty() ? 0.0 : rep.losses.back().total;
  std::printf("trained %zu steps on %zu questions, final loss %.6f (%.1fs)\n", rep.losses.size(), data.size(),
              last, rep.wall_seconds);
}

void run_eval(const EvalArgs& a, const cli::OptionSet& opts) {
  const Strategy strategy = parse_strategy(a.strategy);
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const auto data = apply_normalization(tail(read_dataset(a.data).first, a.test_count), ck.normalization);
  fs::create_directories(a.out);
  write_resolved(a.out, "eval", opts);
  report(a.out, std::string(to_string(strategy)), data, a.workers, [&](const QuestionInstance& q) {
    return select_answer(score_paths(ck.model, q), q, strategy);
  });
}

void run_baseline(const BaselineArgs& a, const cli::OptionSet& opts) {
  const auto data = tail(read_dataset(a.data).first, a.test_count);
  std::function<SelectionResult(const QuestionInstance&)> select;
  if (a.which == "voting") {
    select = [](const QuestionInstance& q) { return majority_vote(q); };
  } else if (a.which == "cot_max") {
    select = [](const QuestionInstance& q) { return cot_decoding_select(q, Strategy::Max); };
  } else if (a.which == "cot_sum") {
    select = [](const QuestionInstance& q) { return cot_decoding_select(q, Strategy::Sum); };
  } else if (a.which == "greedy") {
    select = [](const QuestionInstance& q) { return greedy_select(q); };
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown baseline '" + a.which + "'");
  }
  fs::create_directories(a.out);
  write_resolved(a.out, "baseline", opts);
  report(a.out, a.which, data, a.workers, select);
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidArgument:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent verifier: synthetic data, training, evaluation and baselines", "latver"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  cli::OptionSet synth_opts(synth_cmd);
  synth_opts.add("out", synth.out, "dataset directory");
  synth_opts.add("dim", synth.spec.dim, "feature dimension")->check(CLI::Range(2ul, 1ul << 20));
  synth_opts.add("questions", synth.spec.questions, "question count")->check(CLI::PositiveNumber);
  synth_opts.add("paths", synth.spec.paths_per_question, "paths per question")->check(CLI::Range(2ul, 1ul << 16));
  synth_opts.add("truth-norm", synth.spec.truth_direction_norm, "length of the truth direction")
      ->check(CLI::NonNegativeNumber);
  synth_opts.add("noise-std", synth.spec.noise_std, "per-coordinate noise")->check(CLI::NonNegativeNumber);
  synth_opts.add("offset-norm", synth.spec.template_offset_norm, "length of the template offset")
      ->check(CLI::NonNegativeNumber);
  synth_opts.add("min-groups", synth.spec.min_groups, "fewest answer groups")->check(CLI::PositiveNumber);
  synth_opts.add("max-groups", synth.spec.max_groups, "most answer groups")->check(CLI::PositiveNumber);
  synth_opts.add("minority-rate", synth.spec.minority_correct_rate, "share of questions with a minority gold group")
      ->check(CLI::Range(0.0, 1.0));
  synth_opts.add("no-answer-rate", synth.spec.no_answer_rate, "chance a wrong path has no answer")
      ->check(CLI::Range(0.0, 1.0));
  synth_opts.add("confidence-gap", synth.spec.confidence_truth_gap, "answer confidence gap between true and false")
      ->check(CLI::NonNegativeNumber);
  synth_opts.add("seed", synth.spec.rng_seed, "random seed");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a verifier and write a checkpoint");
  cli::OptionSet train_opts(train_cmd);
  train_opts.add("data", tr.data, "dataset directory")->required();
  train_opts.add("out", tr.out, "output directory");
  train_opts.add("test-count", tr.test_count, "hold out this many trailing questions");
  train_opts.add("lr", tr.config.learning_rate, "learning rate")->check(CLI::PositiveNumber);
  train_opts.add("weight-decay", tr.config.weight_decay, "decoupled weight decay")->check(CLI::NonNegativeNumber);
  train_opts.add("max-steps", tr.config.max_steps, "optimizer steps");
  train_opts.add("batch", tr.config.batch_questions, "questions per step")->check(CLI::PositiveNumber);
  train_opts.add("w-nega", tr.config.w_nega, "negation loss weight")->check(CLI::NonNegativeNumber);
  train_opts.add("w-intra", tr.config.w_intra, "intra-group loss weight")->check(CLI::NonNegativeNumber);
  train_opts.add("w-inter", tr.config.w_inter, "inter-group loss weight")->check(CLI::NonNegativeNumber);
  train_opts.add("w-sum", tr.config.w_sum, "weight of the sum part of the negation loss")->check(CLI::NonNegativeNumber);
  train_opts.add("w-diff", tr.config.w_diff, "weight of the difference part of the negation loss")
      ->check(CLI::NonNegativeNumber);
  train_opts.add("inter-variant", tr.inter_variant, "soft_prob or t_norm")
      ->check(CLI::IsMember({"soft_prob", "t_norm"}));
  train_opts.flag("inter-entropy", tr.config.inter_entropy, "entropy term in the soft inter-group loss");
  train_opts.add("normalization", tr.normalization, "none or per_template_center_scale")
      ->check(CLI::IsMember({"none", "per_template_center_scale"}));
  train_opts.add("hidden1", tr.config.hidden1, "first hidden width")->check(CLI::PositiveNumber);
  train_opts.add("hidden2", tr.config.hidden2, "second hidden width")->check(CLI::PositiveNumber);
  train_opts.add("seed", tr.config.rng_seed, "random seed");
  train_opts.flag("supervised", tr.supervised, "train on gold labels with cross-entropy instead");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score a dataset with a trained verifier");
  cli::OptionSet eval_opts(eval_cmd);
  eval_opts.add("data", ev.data, "dataset directory")->required();
  eval_opts.add("checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval_opts.add("out", ev.out, "output directory");
  eval_opts.add("strategy", ev.strategy, "max or sum")->check(CLI::IsMember({"max", "sum"}));
  eval_opts.add("test-count", ev.test_count, "evaluate only this many trailing questions");
  eval_opts.add("workers", ev.workers, "worker threads")->check(CLI::PositiveNumber);

  BaselineArgs bl;
  auto* baseline_cmd = app.add_subcommand("baseline", "evaluate a selection baseline");
  cli::OptionSet baseline_opts(baseline_cmd);
  baseline_opts.add("data", bl.data, "dataset directory")->required();
  baseline_opts.add("which", bl.which, "voting, cot_max, cot_sum or greedy")
      ->check(CLI::IsMember({"voting", "cot_max", "cot_sum", "greedy"}));
  baseline_opts.add("out", bl.out, "output directory");
  baseline_opts.add("test-count", bl.test_count, "evaluate only this many trailing questions");
  baseline_opts.add("workers", bl.workers, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: Usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*synth_cmd) {
      synth_opts.apply_config_file();
      run_synth(synth, synth_opts);
    } else if (*train_cmd) {
      train_opts.apply_config_file();
      run_train(tr, train_opts);
    } else if (*eval_cmd) {
      eval_opts.apply_config_file();
      run_eval(ev, eval_opts);
    } else if (*baseline_cmd) {
      baseline_opts.apply_config_file();
      run_baseline(bl, baseline_opts);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(e.kind_name()).c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: IoError: %s\n", e.what());
    return 1;
  }
  return 0;
}
