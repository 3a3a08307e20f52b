#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "camel/episode.hpp"
#include "camel/layers.hpp"
#include "camel/paramset.hpp"
#include "camel/rng.hpp"
#include "camel/wirtinger.hpp"

namespace camel::meta {

/// Step-size rule of the smoothness analysis; every constant is user supplied.
struct AdaptiveBetaConfig {
    double L = 0.0;         // smoothness constant, > 0
    double rho = 0.0;       // Hessian Lipschitz constant, >= 0
    std::size_t tasks = 1;  // B', tasks sampled per estimate
    std::size_t batch = 1;  // D_beta, support minibatch per task
};

enum class OuterOptimizer : std::uint8_t { Sgd, Adam };
const char* optimizer_name(OuterOptimizer o);
OuterOptimizer parse_optimizer(const std::string& s);

struct MetaConfig {
    double alpha = 0.1;
    double beta = 0.001;
    std::size_t meta_batch = 2;
    std::size_t inner_steps = 5;
    std::size_t finetune_steps = 10;
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t q_size = 15;
    std::size_t epochs = 1000;
    bool first_order = false;
    std::uint64_t seed = 0;
    std::optional<AdaptiveBetaConfig> adaptive_beta;
    OuterOptimizer outer_optimizer = OuterOptimizer::Sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Stop after this many iterations without an improvement of plateau_tol; 0 disables.
    std::size_t plateau_window = 50;
    double plateau_tol = 1e-6;

    void validate() const;
};

/// A task seen through its two losses. The quadratic toy family and network episodes both fit.
struct MetaTask {
    LossFn support;
    LossFn query;
    /// Post-adaptation query accuracy; optional.
    std::function<double(const ParamSet&)> accuracy;
    /// Parameters live on the real line: gradients are projected onto it.
    bool real_params = false;
};

/// Support and query cross-entropy of `net` on one episode.
MetaTask make_task(const layers::Classifier& net, const Episode& ep);

/// Loss became NaN or infinite.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// theta' after `steps` full-batch complex-gradient steps on the support loss.
ParamSet inner_update(const ParamSet& theta, const MetaTask& task, double alpha, std::size_t steps);

/// (1/B) sum_i L_Q(theta'_i).
double meta_objective(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha, std::size_t steps);

struct MetaGradient {
    ParamSet grad;
    /// Mean post-adaptation query loss, the value of meta_objective at theta.
    double meta_loss = 0.0;
    /// Mean post-adaptation query accuracy (NaN when tasks have no accuracy function).
    double query_acc = 0.0;
    /// Vector-Hessian products evaluated by double backprop.
    std::size_t hvp_calls = 0;
    /// Backward sweeps recorded for re-differentiation.
    std::size_t recorded_backwards = 0;
};

/// Exact outer gradient of meta_objective. One inner step uses the Hessian-corrected form
///   q - alpha (H_tt q + H_ct conj(q)),  q = grad L_Q(theta'),
/// with both products from the recorded support gradient. Longer inner loops, and
/// real-parameter tasks, differentiate through the recorded trajectory instead.
MetaGradient meta_gradient(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha,
                           std::size_t steps);

/// Average of grad L_Q(theta'_i); no second-order terms.
MetaGradient first_order_meta_gradient(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha,
                                       std::size_t steps);

/// theta - beta grad.
ParamSet outer_update(const ParamSet& theta, const ParamSet& grad, double beta);

/// Adam over complex parameters, second moment on |g|^2.
class Adam {
public:
    Adam(double b1, double b2, double eps) : b1_(b1), b2_(b2), eps_(eps) {}
    ParamSet step(const ParamSet& theta, const ParamSet& grad, double lr);

private:
    double b1_, b2_, eps_;
    std::size_t t_ = 0;
    ParamSet m_;
    std::vector<CTensor> v_;
};

/// beta~(theta)/12 with beta~ = 1 / (4L + 2 rho alpha mean_i ||grad f_i||) over the given
/// support losses (one per sampled task, already restricted to D_beta samples).
double adaptive_beta(const ParamSet& theta, const std::vector<LossFn>& task_losses, double alpha,
                     const AdaptiveBetaConfig& cfg);

struct HistoryRow {
    std::size_t iteration = 0;
    double meta_loss = 0.0;
    double query_acc = 0.0;
    friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct TrainState {
    ParamSet theta;
    std::size_t iteration = 0;
    Rng::State rng;
    std::vector<HistoryRow> history;
    /// Stopped by the plateau rule rather than the iteration budget.
    bool plateaued = false;
};

/// Draws a meta-batch of `count` tasks.
using TaskSampler = std::function<std::vector<MetaTask>(Rng& rng, std::size_t count)>;
/// Per-iteration hook, e.g. for periodic checkpoints.
using TrainCallback = std::function<void(const TrainState&)>;

/// Raised on divergence; carries the last state whose loss was finite.
class TrainDiverged : public DivergenceError {
public:
    TrainDiverged(const std::string& what, TrainState last_good)
        : DivergenceError(what), last_good_(std::move(last_good)) {}
    const TrainState& last_good() const noexcept { return last_good_; }

private:
    TrainState last_good_;
};

/// Sample, adapt, differentiate, update until cfg.epochs total iterations or a plateau.
/// `start` may be a resumed state; its history is extended in place.
TrainState train_camel(const MetaConfig& cfg, const TaskSampler& sampler, TrainState start,
                       const TrainCallback& on_iteration = {});

struct EvalReport {
    double accuracy = 0.0;
    double ci95 = 0.0;
    std::vector<double> episode_accuracy;
    /// Row-normalized confusion in percent over global class ids; rows = actual.
    std::vector<std::vector<double>> confusion;
    std::vector<std::size_t> row_counts;
};

/// Fine-tune on each support set for cfg.finetune_steps (step size cfg.alpha), classify the
/// query set, and aggregate. n_classes sizes the confusion matrix.
EvalReport evaluate(const ParamSet& theta, const std::vector<Episode>& episodes, const layers::Classifier& net,
                    const MetaConfig& cfg, std::size_t n_classes);

/// Mean and 1.96 std / sqrt(n) of a sample.
std::pair<double, double> mean_ci95(const std::vector<double>& xs);

/// Worker cap from CAMEL_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_threads();

}  // namespace camel::meta
