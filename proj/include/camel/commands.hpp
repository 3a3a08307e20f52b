#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "camel/checkpoint.hpp"
#include "camel/config.hpp"
#include "camel/episode.hpp"
#include "camel/layers.hpp"
#include "camel/meta.hpp"
#include "camel/signals.hpp"
#include "camel/tape.hpp"
#include "camel/wirtinger.hpp"

namespace camel::cli {

/// Process exit codes shared by every command.
enum ExitCode : int { kOk = 0, kValidationFailed = 1, kDiverged = 2, kIoOrConfig = 3 };

// ---------------------------------------------------------------------------------------------
// Toy chain J = |exp(-(x*)^2)|, optimized with the complex chain rule and with the naive rule.

/// Complex gradient computed with the conjugate-path sensitivities dropped, i.e. as if every
/// node were analytic (d x*/d x treated as 0).
std::vector<CTensor> naive_gradient(ad::Tape& tape, const ad::Var& loss, std::span<const ad::Var> wrt);

struct ToyRow {
    std::size_t step = 0;
    double j_complex = 0.0;
    double j_naive = 0.0;
    double grad_complex = 0.0;  // |gradient| used for the step
    double grad_naive = 0.0;
};

std::vector<ToyRow> toychain(std::size_t steps, double lr);
std::string toychain_csv(const std::vector<ToyRow>& rows);

// ---------------------------------------------------------------------------------------------
// Experiment plumbing shared by train, eval and the acceptance suite.

struct TaskData {
    signals::FramePool train;
    signals::FramePool test;
};

/// Loads or generates the frame pool, applies the scenario split and the SNR windows.
TaskData load_task_data(const RunConfig& cfg);

/// Architecture with the output head sized to the episode width.
layers::ArchConfig effective_arch(const RunConfig& cfg);

/// Initial parameters for a seed.
ParamSet init_theta(const layers::CamelNet& net, std::uint64_t seed);

meta::TaskSampler make_sampler(const layers::CamelNet& net, const signals::FramePool& pool, const RunConfig& cfg);

/// cfg.eval_episodes test episodes, drawn from a stream keyed on data_seed so every model
/// trained on the same data is scored on the same episodes.
std::vector<Episode> eval_episodes(const signals::FramePool& pool, const RunConfig& cfg);

struct TrainOutcome {
    meta::TrainState state;
    bool diverged = false;
    std::string message;
};

/// Trains from scratch (or from `resume`), saving periodic checkpoints when `save` is set.
TrainOutcome run_training(const RunConfig& cfg, const std::optional<Checkpoint>& resume, bool save);

Checkpoint to_checkpoint(const layers::ArchConfig& arch, const meta::TrainState& st);

// ---------------------------------------------------------------------------------------------
// Commands. Each prints a human-readable report to `out` and returns an ExitCode.

int cmd_gradcheck(const RunConfig& cfg, const std::string& corrupt, std::ostream& out);
int cmd_toychain(const RunConfig& cfg, const std::string& csv_path, std::ostream& out);
int cmd_bench_lemma1(std::size_t m, std::size_t depth, std::ostream& out);
int cmd_gen(const RunConfig& cfg, const std::string& out_path, std::ostream& out);
int cmd_train(const RunConfig& cfg, const std::string& resume_path, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, bool frozen_init, std::ostream& out);

/// Confusion matrix as CSV: header row of predicted names, one row per actual class.
std::string confusion_csv(const meta::EvalReport& rep, const std::vector<std::string>& names);

}  // namespace camel::cli
