#include "camel/meta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <memory>
#include <thread>

namespace camel::meta {

using ad::Tape;
using ad::Var;

const char* optimizer_name(OuterOptimizer o) { return o == OuterOptimizer::Adam ? "adam" : "sgd"; }

OuterOptimizer parse_optimizer(const std::string& s) {
    if (s == "sgd") return OuterOptimizer::Sgd;
    if (s == "adam") return OuterOptimizer::Adam;
    throw std::invalid_argument("unknown outer optimizer '" + s + "' (expected sgd or adam)");
}

void MetaConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("MetaConfig: " + m); };
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be finite and non-negative");
    if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta must be positive");
    if (meta_batch < 1) fail("meta_batch must be at least 1");
    if (inner_steps < 1) fail("inner_steps must be at least 1");
    if (n_way < 1 || k_shot < 1 || q_size < 1) fail("n_way, k_shot and q_size must be positive");
    if (adaptive_beta) {
        const auto& a = *adaptive_beta;
        if (!(a.L > 0.0)) fail("adaptive_beta needs L > 0");
        if (!(a.rho >= 0.0)) fail("adaptive_beta needs rho >= 0");
        if (a.tasks < 1 || a.batch < 1) fail("adaptive_beta needs tasks >= 1 and batch >= 1");
        if (alpha > 1.0 / (6.0 * a.L)) fail("alpha must lie in (0, 1/(6L)] when L is given");
    }
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("CAMEL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

/// Runs f(i) for i in [0, n) on up to worker_threads() threads. Results must be written to
/// per-index slots so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers = std::min(n, worker_threads());
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ParamSet project(const ParamSet& p, bool real_params) { return real_params ? p.real_projected() : p; }

void require_tasks(const std::vector<MetaTask>& tasks) {
    if (tasks.empty()) throw std::invalid_argument("meta: empty task batch");
}

struct TaskGrad {
    ParamSet grad;
    double loss = 0.0;
    double acc = std::numeric_limits<double>::quiet_NaN();
    std::size_t hvps = 0;
    std::size_t recorded = 0;
};

TaskGrad lemma4_task(const ParamSet& theta, const MetaTask& task, double alpha) {
    HessianProbe probe(task.support, theta);
    if (!std::isfinite(probe.loss())) throw DivergenceError("support loss is not finite");
    const ParamSet adapted = theta - probe.gradient().scaled(alpha);
    const LossAndGrad q = complex_gradient(task.query, adapted);
    const cplx j(0.0, 1.0);
    const ParamSet p1 = probe.apply(q.grad);
    const ParamSet p2 = probe.apply(q.grad.scaled(j));
    const ParamSet h_tt_q = (p1 - p2.scaled(j)).scaled(0.5);
    const ParamSet h_ct_qc = (p1 + p2.scaled(j)).scaled(0.5);
    TaskGrad r;
    r.grad = q.grad - (h_tt_q + h_ct_qc).scaled(alpha);
    r.loss = q.loss;
    if (task.accuracy) r.acc = task.accuracy(adapted);
    r.hvps = probe.apply_count();
    r.recorded = 1;
    return r;
}

TaskGrad trajectory_task(const ParamSet& theta, const MetaTask& task, double alpha, std::size_t steps) {
    Tape tape;
    const std::vector<Var> leaves = theta.to_leaves(tape);
    std::vector<Var> cur = leaves;
    for (std::size_t s = 0; s < steps; ++s) {
        const Var loss = task.support(tape, cur);
        if (!std::isfinite(loss.value().item().real())) throw DivergenceError("support loss is not finite");
        const std::vector<Var> g = tape.grad(loss, cur);
        for (std::size_t k = 0; k < cur.size(); ++k) {
            Var step = ad::scale(g[k], 2.0 * alpha);
            if (task.real_params) step = ad::real(step);
            cur[k] = ad::sub(cur[k], step);
        }
    }
    const Var qloss = task.query(tape, cur);
    TaskGrad r;
    r.loss = qloss.value().item().real();
    r.recorded = tape.recorded_backward_count();
    std::vector<CTensor> adapted_vals;
    for (const auto& v : cur) adapted_vals.push_back(v.value());
    const ParamSet adapted = theta.with_values(std::move(adapted_vals));
    r.grad = project(theta.with_values(complex_gradient(tape, qloss, leaves)), task.real_params);
    if (task.accuracy) r.acc = task.accuracy(adapted);
    return r;
}

TaskGrad first_order_task(const ParamSet& theta, const MetaTask& task, double alpha, std::size_t steps) {
    const ParamSet adapted = inner_update(theta, task, alpha, steps);
    const LossAndGrad q = complex_gradient(task.query, adapted);
    TaskGrad r;
    r.grad = project(q.grad, task.real_params);
    r.loss = q.loss;
    if (task.accuracy) r.acc = task.accuracy(adapted);
    return r;
}

MetaGradient reduce(const ParamSet& theta, std::vector<TaskGrad>& parts) {
    MetaGradient out;
    out.grad = theta.zeros_like();
    double acc = 0.0;
    for (const auto& p : parts) {
        out.grad = out.grad + p.grad;
        out.meta_loss += p.loss;
        acc += p.acc;
        out.hvp_calls += p.hvps;
        out.recorded_backwards += p.recorded;
    }
    const double inv = 1.0 / static_cast<double>(parts.size());
    out.grad = out.grad.scaled(inv);
    out.meta_loss *= inv;
    out.query_acc = acc * inv;
    return out;
}

}  // namespace

MetaTask make_task(const layers::Classifier& net, const Episode& ep) {
    auto shared = std::make_shared<const Episode>(ep);
    const layers::Classifier* n = &net;
    MetaTask t;
    t.support = [n, shared](Tape& tape, std::span<const Var> p) {
        return layers::cross_entropy(n->log_probs(tape, p, shared->support_x), shared->support_y);
    };
    t.query = [n, shared](Tape& tape, std::span<const Var> p) {
        return layers::cross_entropy(n->log_probs(tape, p, shared->query_x), shared->query_y);
    };
    t.accuracy = [n, shared](const ParamSet& theta) {
        Tape tape;
        ad::NoGradGuard guard(tape);
        const auto leaves = theta.to_leaves(tape, false);
        const auto pred = layers::argmax_rows(n->log_probs(tape, leaves, shared->query_x).value());
        std::size_t hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == shared->query_y[i];
        return static_cast<double>(hit) / static_cast<double>(pred.size());
    };
    t.real_params = net.real_params();
    return t;
}

ParamSet inner_update(const ParamSet& theta, const MetaTask& task, double alpha, std::size_t steps) {
    if (steps < 1) throw std::invalid_argument("inner_update: steps must be at least 1");
    ParamSet cur = theta;
    for (std::size_t s = 0; s < steps; ++s) {
        const LossAndGrad lg = complex_gradient(task.support, cur);
        if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
            throw DivergenceError("inner_update: non-finite support loss " + std::to_string(lg.loss) + " at step " +
                                  std::to_string(s));
        }
        cur = cur - project(lg.grad, task.real_params).scaled(alpha);
    }
    return cur;
}

double meta_objective(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha, std::size_t steps) {
    require_tasks(tasks);
    std::vector<double> losses(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t i) {
        losses[i] = evaluate_loss(tasks[i].query, inner_update(theta, tasks[i], alpha, steps));
    });
    double s = 0.0;
    for (double l : losses) s += l;
    return s / static_cast<double>(tasks.size());
}

MetaGradient meta_gradient(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha,
                           std::size_t steps) {
    require_tasks(tasks);
    if (steps < 1) throw std::invalid_argument("meta_gradient: steps must be at least 1");
    std::vector<TaskGrad> parts(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t i) {
        parts[i] = (steps == 1 && !tasks[i].real_params) ? lemma4_task(theta, tasks[i], alpha)
                                                         : trajectory_task(theta, tasks[i], alpha, steps);
    });
    return reduce(theta, parts);
}

MetaGradient first_order_meta_gradient(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha,
                                       std::size_t steps) {
    require_tasks(tasks);
    std::vector<TaskGrad> parts(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t i) { parts[i] = first_order_task(theta, tasks[i], alpha, steps); });
    return reduce(theta, parts);
}

ParamSet outer_update(const ParamSet& theta, const ParamSet& grad, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("outer_update: beta must be positive");
    theta.require_same_layout(grad, "outer_update");
    return theta - grad.scaled(beta);
}

ParamSet Adam::step(const ParamSet& theta, const ParamSet& grad, double lr) {
    theta.require_same_layout(grad, "Adam::step");
    if (m_.empty()) {
        m_ = theta.zeros_like();
        for (const auto& e : theta) v_.emplace_back(e.second.shape());
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    std::vector<CTensor> out;
    for (std::size_t p = 0; p < theta.size(); ++p) {
        CTensor next = theta.tensor(p);
        CTensor& m = m_.tensor(p);
        CTensor& v = v_[p];
        const CTensor& g = grad.tensor(p);
        for (std::size_t k = 0; k < next.size(); ++k) {
            m[k] = b1_ * m[k] + (1.0 - b1_) * g[k];
            v[k] = b2_ * v[k].real() + (1.0 - b2_) * std::norm(g[k]);
            next[k] -= lr * (m[k] / c1) / (std::sqrt(v[k].real() / c2) + eps_);
        }
        out.push_back(std::move(next));
    }
    return theta.with_values(std::move(out));
}

double adaptive_beta(const ParamSet& theta, const std::vector<LossFn>& task_losses, double alpha,
                     const AdaptiveBetaConfig& cfg) {
    if (!(cfg.L > 0.0) || !(cfg.rho >= 0.0)) throw std::invalid_argument("adaptive_beta: needs L > 0 and rho >= 0");
    if (task_losses.empty()) throw std::invalid_argument("adaptive_beta: needs at least one task");
    double mean_norm = 0.0;
    if (cfg.rho > 0.0) {
        for (const auto& f : task_losses) mean_norm += complex_gradient(f, theta).grad.norm();
        mean_norm /= static_cast<double>(task_losses.size());
    }
    const double tilde = 1.0 / (4.0 * cfg.L + 2.0 * cfg.rho * alpha * mean_norm);
    return tilde / 12.0;
}

TrainState train_camel(const MetaConfig& cfg, const TaskSampler& sampler, TrainState start,
                       const TrainCallback& on_iteration) {
    cfg.validate();
    TrainState state = std::move(start);
    Rng rng = Rng::from_state(state.rng);
    Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    state.plateaued = false;

    while (state.iteration < cfg.epochs) {
        const std::vector<MetaTask> tasks = sampler(rng, cfg.meta_batch);
        MetaGradient mg;
        try {
            mg = cfg.first_order ? first_order_meta_gradient(state.theta, tasks, cfg.alpha, cfg.inner_steps)
                                 : meta_gradient(state.theta, tasks, cfg.alpha, cfg.inner_steps);
        } catch (const DivergenceError& e) {
            throw TrainDiverged(std::string("diverged at iteration ") + std::to_string(state.iteration + 1) + ": " +
                                    e.what(),
                                state);
        } catch (const ad::NonFiniteLoss& e) {
            throw TrainDiverged(std::string("diverged at iteration ") + std::to_string(state.iteration + 1) + ": " +
                                    e.what(),
                                state);
        }
        if (!std::isfinite(mg.meta_loss) || !mg.grad.all_finite()) {
            throw TrainDiverged("diverged at iteration " + std::to_string(state.iteration + 1) +
                                    ": meta-loss or meta-gradient is not finite",
                                state);
        }
        double beta = cfg.beta;
        if (cfg.adaptive_beta) {
            std::vector<LossFn> losses;
            for (auto& t : sampler(rng, cfg.adaptive_beta->tasks)) losses.push_back(std::move(t.support));
            beta = adaptive_beta(state.theta, losses, cfg.alpha, *cfg.adaptive_beta);
        }
        ParamSet next = cfg.outer_optimizer == OuterOptimizer::Adam ? adam.step(state.theta, mg.grad, beta)
                                                                     : outer_update(state.theta, mg.grad, beta);
        if (!next.all_finite()) {
            throw TrainDiverged("diverged at iteration " + std::to_string(state.iteration + 1) +
                                    ": parameters became non-finite",
                                state);
        }
        state.theta = std::move(next);
        ++state.iteration;
        state.rng = rng.state();
        state.history.push_back({state.iteration, mg.meta_loss, mg.query_acc});
        if (on_iteration) on_iteration(state);

        if (mg.meta_loss < best - cfg.plateau_tol) {
            best = mg.meta_loss;
            since_best = 0;
        } else if (cfg.plateau_window > 0 && ++since_best >= cfg.plateau_window) {
            state.plateaued = true;
            break;
        }
    }
    return state;
}

std::pair<double, double> mean_ci95(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return {mean, 1.96 * sd / std::sqrt(n)};
}

EvalReport evaluate(const ParamSet& theta, const std::vector<Episode>& episodes, const layers::Classifier& net,
                    const MetaConfig& cfg, std::size_t n_classes) {
    if (episodes.empty()) throw std::invalid_argument("evaluate: no episodes");
    std::vector<std::vector<int>> preds(episodes.size());
    parallel_for(episodes.size(), [&](std::size_t e) {
        const MetaTask task = make_task(net, episodes[e]);
        const ParamSet adapted =
            (cfg.finetune_steps > 0 && cfg.alpha > 0.0) ? inner_update(theta, task, cfg.alpha, cfg.finetune_steps) : theta;
        Tape tape;
        ad::NoGradGuard guard(tape);
        const auto leaves = adapted.to_leaves(tape, false);
        preds[e] = layers::argmax_rows(net.log_probs(tape, leaves, episodes[e].query_x).value());
    });

    EvalReport rep;
    std::vector<std::vector<std::size_t>> counts(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const Episode& ep = episodes[e];
        std::size_t hit = 0;
        for (std::size_t i = 0; i < preds[e].size(); ++i) {
            const int y = ep.query_y[i];
            const int p = preds[e][i];
            hit += p == y;
            const auto actual = static_cast<std::size_t>(ep.classes.at(static_cast<std::size_t>(y)));
            const auto guess = static_cast<std::size_t>(ep.classes.at(static_cast<std::size_t>(p)));
            if (actual >= n_classes || guess >= n_classes) throw std::out_of_range("evaluate: class id beyond n_classes");
            ++counts[actual][guess];
        }
        rep.episode_accuracy.push_back(static_cast<double>(hit) / static_cast<double>(preds[e].size()));
    }
    std::tie(rep.accuracy, rep.ci95) = mean_ci95(rep.episode_accuracy);
    rep.confusion.assign(n_classes, std::vector<double>(n_classes, 0.0));
    rep.row_counts.assign(n_classes, 0);
    for (std::size_t r = 0; r < n_classes; ++r) {
        std::size_t total = 0;
        for (auto c : counts[r]) total += c;
        rep.row_counts[r] = total;
        if (total == 0) continue;
        for (std::size_t c = 0; c < n_classes; ++c)
            rep.confusion[r][c] = 100.0 * static_cast<double>(counts[r][c]) / static_cast<double>(total);
    }
    return rep;
}

}  // namespace camel::meta
