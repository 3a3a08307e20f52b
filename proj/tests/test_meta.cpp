#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <cstdlib>

#include "camel/layers.hpp"
#include "camel/meta.hpp"
#include "camel/signals.hpp"
#include "camel/wirtinger.hpp"

using namespace camel;
using namespace camel::meta;
using ad::Tape;
using ad::Var;
using testing::randn;

namespace {

ParamSet scalar_param(cplx v) {
    ParamSet p;
    p.add("theta", CTensor::scalar(v));
    return p;
}

cplx value(const ParamSet& p) { return p.tensor(0).item(); }

/// f(theta) = |theta - c|^2 on both the support and the query side.
MetaTask quadratic(cplx c) {
    const LossFn f = [c](Tape& t, std::span<const Var> p) {
        const Var d = ad::sub(p[0], t.constant(CTensor::scalar(c)));
        return ad::real(ad::mul(d, ad::conj(d)));
    };
    return {f, f, {}, false};
}

layers::ArchConfig tiny_arch() {
    layers::ArchConfig a;
    a.n_classes = 2;
    a.frame_len = 8;
    a.conv_channels = 3;
    a.attn_dim = 4;
    a.n_heads = 2;
    a.fc_hidden = 3;
    // Smooth activation: CReLU kinks near the adapted point make central differences unreliable.
    a.activation = ad::ActKind::CTanh;
    return a;
}

Episode random_episode(Rng& rng, std::size_t n_way, std::size_t k_shot, std::size_t q, std::size_t len) {
    Episode ep;
    ep.n_way = n_way;
    ep.k_shot = k_shot;
    ep.support_x = randn(rng, {n_way * k_shot, 1, len});
    ep.query_x = randn(rng, {n_way * q, 1, len});
    for (std::size_t c = 0; c < n_way; ++c) {
        ep.classes.push_back(static_cast<int>(c));
        for (std::size_t k = 0; k < k_shot; ++k) ep.support_y.push_back(static_cast<int>(c));
        for (std::size_t k = 0; k < q; ++k) ep.query_y.push_back(static_cast<int>(c));
    }
    return ep;
}

/// Central difference of meta_objective along v, compared to Re<grad, v>.
double directional_error(const ParamSet& theta, const std::vector<MetaTask>& tasks, double alpha, std::size_t steps,
                         const ParamSet& grad, const ParamSet& v) {
    const double h = 1e-6;
    const double fd = (meta_objective(theta + v.scaled(h), tasks, alpha, steps) -
                       meta_objective(theta - v.scaled(h), tasks, alpha, steps)) /
                      (2 * h);
    const double an = grad.vdot(v).real();
    return std::abs(an - fd) / std::max({std::abs(fd), std::abs(an), 1e-8});
}

ParamSet random_like(const ParamSet& p, Rng& rng, bool real) {
    std::vector<CTensor> vals;
    for (const auto& e : p) {
        CTensor t = randn(rng, e.second.shape());
        if (real) t = real_part(t);
        vals.push_back(t);
    }
    return p.with_values(vals);
}

/// Predicts the label written into each frame's first sample.
class OracleNet final : public layers::Classifier {
public:
    explicit OracleNet(std::size_t n) : n_(n) {}
    Var log_probs(Tape& tape, std::span<const Var>, const CTensor& frames) const override {
        const std::size_t count = frames.dim(0), len = frames.dim(2);
        CTensor lp({count, n_}, cplx(-50.0, 0.0));
        for (std::size_t i = 0; i < count; ++i) lp.at(i, static_cast<std::size_t>(frames[i * len].real())) = 0.0;
        return ad::log_softmax_last(tape.constant(lp));
    }

private:
    std::size_t n_;
};

}  // namespace

TEST_CASE("inner_update") {
    const MetaTask task = quadratic({1.0, -2.0});
    const ParamSet theta = scalar_param({0.5, 0.25});
    CHECK(inner_update(theta, task, 0.0, 3) == theta);
    const double alpha = 0.1;
    const cplx once = value(inner_update(theta, task, alpha, 1));
    CHECK(std::abs(once - (value(theta) - 2 * alpha * (value(theta) - cplx(1, -2)))) <= 1e-15);
    const ParamSet two = inner_update(theta, task, alpha, 2);
    const ParamSet chained = inner_update(inner_update(theta, task, alpha, 1), task, alpha, 1);
    CHECK(two.max_abs_diff(chained) == 0.0);
    CHECK(value(theta) == cplx(0.5, 0.25));
}

TEST_CASE("meta_objective") {
    const ParamSet theta = scalar_param({0.3, 0.7});
    const std::vector<cplx> cs = {{1, 0}, {-0.5, 2}, {0.25, -1}};
    std::vector<MetaTask> tasks;
    for (auto c : cs) tasks.push_back(quadratic(c));
    CHECK(meta_objective(theta, {tasks[0]}, 0.0, 1) == std::norm(value(theta) - cs[0]));
    CHECK(meta_objective(theta, {tasks[1], tasks[1]}, 0.2, 1) == meta_objective(theta, {tasks[1]}, 0.2, 1));
    const double alpha = 0.15;
    double closed = 0;
    for (auto c : cs) closed += std::norm(value(theta) - c);
    closed *= (1 - 2 * alpha) * (1 - 2 * alpha) / cs.size();
    CHECK(std::abs(meta_objective(theta, tasks, alpha, 1) - closed) <= 1e-14);
}

TEST_CASE("meta_gradient on the quadratic family") {
    const ParamSet theta = scalar_param({0.3, 0.7});
    const std::vector<cplx> cs = {{1, 0}, {-0.5, 2}};
    std::vector<MetaTask> tasks;
    for (auto c : cs) tasks.push_back(quadratic(c));

    SUBCASE("closed form") {
        for (double alpha : {0.0, 0.05, 0.2}) {
            cplx closed = 0;
            for (auto c : cs) {
                const cplx adapted = value(theta) - 2 * alpha * (value(theta) - c);
                closed += (1 - 2 * alpha) * 2.0 * (adapted - c);
            }
            closed /= double(cs.size());
            const MetaGradient mg = meta_gradient(theta, tasks, alpha, 1);
            CHECK(std::abs(value(mg.grad) - closed) <= 1e-10);
            CHECK(mg.hvp_calls == 2 * cs.size());
            const MetaGradient fo = first_order_meta_gradient(theta, tasks, alpha, 1);
            CHECK(fo.hvp_calls == 0);
            CHECK(fo.recorded_backwards == 0);
            // Per task the exact gradient is (1 - 2 alpha) times the first-order one.
            CHECK(std::abs(value(mg.grad) - (1 - 2 * alpha) * value(fo.grad)) <= 1e-12);
        }
    }
    SUBCASE("alpha = 0 collapses to the mean query gradient") {
        const MetaGradient mg = meta_gradient(theta, tasks, 0.0, 1);
        const MetaGradient fo = first_order_meta_gradient(theta, tasks, 0.0, 1);
        cplx mean = 0;
        for (auto c : cs) mean += 2.0 * (value(theta) - c);
        mean /= 2.0;
        CHECK(std::abs(value(mg.grad) - value(fo.grad)) <= 1e-12);
        CHECK(std::abs(value(mg.grad) - mean) <= 1e-12);
    }
    SUBCASE("conjugating parameters and targets conjugates the gradient") {
        std::vector<MetaTask> conj_tasks;
        for (auto c : cs) conj_tasks.push_back(quadratic(std::conj(c)));
        const cplx g = value(meta_gradient(theta, tasks, 0.1, 1).grad);
        const cplx gc = value(meta_gradient(theta.conjugated(), conj_tasks, 0.1, 1).grad);
        CHECK(std::abs(gc - std::conj(g)) <= 1e-14);
    }
    SUBCASE("multi-step inner loops agree with finite differences") {
        Rng rng(2);
        const MetaGradient mg = meta_gradient(theta, tasks, 0.1, 3);
        for (int i = 0; i < 4; ++i) {
            CHECK(directional_error(theta, tasks, 0.1, 3, mg.grad, random_like(theta, rng, false)) <= 1e-6);
        }
    }
}

TEST_CASE("meta_gradient on a small network against finite differences") {
    Rng rng(31);
    for (bool real_valued : {false, true}) {
        layers::ArchConfig arch = tiny_arch();
        arch.real_valued = real_valued;
        const layers::CamelNet net(arch);
        const ParamSet theta = net.init_params(rng);
        CHECK(theta.numel() <= 500);
        std::vector<MetaTask> tasks;
        for (int b = 0; b < 2; ++b) tasks.push_back(make_task(net, random_episode(rng, 2, 2, 3, 8)));
        for (std::size_t steps : {1, 2}) {
            const MetaGradient mg = meta_gradient(theta, tasks, 0.1, steps);
            CHECK(std::abs(mg.meta_loss - meta_objective(theta, tasks, 0.1, steps)) <= 1e-12);
            double worst = 0;
            for (int d = 0; d < 10; ++d) {
                worst = std::max(worst, directional_error(theta, tasks, 0.1, steps, mg.grad,
                                                          random_like(theta, rng, real_valued)));
            }
            CAPTURE(real_valued);
            CAPTURE(steps);
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("meta_gradient is independent of the worker count") {
    Rng rng(32);
    const layers::CamelNet net(tiny_arch());
    const ParamSet theta = net.init_params(rng);
    std::vector<MetaTask> tasks;
    for (int b = 0; b < 3; ++b) tasks.push_back(make_task(net, random_episode(rng, 2, 1, 2, 8)));
    ::setenv("CAMEL_THREADS", "1", 1);
    CHECK(worker_threads() == 1);
    const MetaGradient one = meta_gradient(theta, tasks, 0.1, 1);
    ::setenv("CAMEL_THREADS", "3", 1);
    CHECK(worker_threads() == 3);
    const MetaGradient three = meta_gradient(theta, tasks, 0.1, 1);
    ::unsetenv("CAMEL_THREADS");
    CHECK(one.grad == three.grad);
    CHECK(one.meta_loss == three.meta_loss);
}

TEST_CASE("outer_update") {
    Rng rng(3);
    ParamSet theta;
    theta.add("a", randn(rng, {2, 2}));
    theta.add("b", randn(rng, {3}));
    CHECK(outer_update(theta, theta.zeros_like(), 0.1) == theta);
    CHECK(outer_update(theta, theta, 1.0).norm() == 0.0);
    const ParamSet g1 = random_like(theta, rng, false), g2 = random_like(theta, rng, false);
    const ParamSet seq = outer_update(outer_update(theta, g1, 0.3), g2, 0.3);
    CHECK(seq.max_abs_diff(outer_update(theta, g1 + g2, 0.3)) <= 1e-15);
}

TEST_CASE("Adam normalizes the first step by the gradient magnitude") {
    Adam adam(0.9, 0.999, 1e-12);
    const ParamSet theta = scalar_param({1, 1});
    const ParamSet g = scalar_param({3, -4});
    const ParamSet next = adam.step(theta, g, 0.01);
    CHECK(std::abs(value(next) - (cplx(1, 1) - 0.01 * cplx(3, -4) / 5.0)) <= 1e-12);
}

TEST_CASE("adaptive_beta") {
    const ParamSet theta = scalar_param({0, 0});
    // Re(conj(c) theta) has complex gradient c everywhere.
    auto linear = [](cplx c) -> LossFn {
        return [c](Tape& t, std::span<const Var> p) {
            return ad::real(ad::mul(t.constant(CTensor::scalar(std::conj(c))), p[0]));
        };
    };
    AdaptiveBetaConfig cfg{1.0, 0.0, 1, 1};
    CHECK(adaptive_beta(theta, {linear({5, 5})}, 0.1, cfg) == doctest::Approx(1.0 / 48));
    cfg.rho = 1.0;
    CHECK(adaptive_beta(theta, {linear({0, 0})}, 0.1, cfg) == doctest::Approx(1.0 / 48));
    const double b = adaptive_beta(theta, {linear({2, 0}), linear({0, 2})}, 0.1, cfg);
    CHECK(b == doctest::Approx(1.0 / (4.0 + 0.4) / 12.0).epsilon(1e-12));
    CHECK(b == doctest::Approx(0.01894).epsilon(1e-3));
}

TEST_CASE("MetaConfig validation") {
    MetaConfig c;
    CHECK_NOTHROW(c.validate());
    c.beta = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.inner_steps = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.adaptive_beta = AdaptiveBetaConfig{0.0, 0.0, 1, 1};
    CHECK_THROWS(c.validate());
    c.adaptive_beta = AdaptiveBetaConfig{1.0, 0.0, 1, 1};
    c.alpha = 0.5;
    CHECK_THROWS(c.validate());
}

namespace {

TaskSampler fixed_sampler(std::vector<cplx> cs) {
    return [cs](Rng&, std::size_t count) {
        std::vector<MetaTask> out;
        for (std::size_t i = 0; i < count; ++i) out.push_back(quadratic(cs[i % cs.size()]));
        return out;
    };
}

MetaConfig toy_config() {
    MetaConfig c;
    c.alpha = 0.1;
    c.beta = 0.5;
    c.inner_steps = 1;
    c.meta_batch = 2;
    c.plateau_window = 0;
    return c;
}

/// Iteration and meta-loss columns; the quadratic tasks have no accuracy (NaN).
std::vector<std::pair<std::size_t, double>> losses(const TrainState& s) {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& r : s.history) out.emplace_back(r.iteration, r.meta_loss);
    return out;
}

TrainState start_at(cplx v) {
    TrainState s;
    s.theta = scalar_param(v);
    s.rng = Rng(1).state();
    return s;
}

}  // namespace

TEST_CASE("train_camel") {
    const std::vector<cplx> cs = {{1, 2}, {-3, 0.5}};
    const cplx optimum = (cs[0] + cs[1]) / 2.0;

    SUBCASE("zero epochs returns the start untouched") {
        MetaConfig c = toy_config();
        c.epochs = 0;
        const TrainState s = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        CHECK(value(s.theta) == cplx(4, 4));
        CHECK(s.history.empty());
    }
    SUBCASE("converges to the minimizer with a decreasing meta-loss") {
        MetaConfig c = toy_config();
        c.epochs = 1000;
        const TrainState s = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        CHECK(std::abs(value(s.theta) - optimum) <= 1e-6);
        for (std::size_t i = 1; i < 20; ++i) CHECK(s.history[i].meta_loss < s.history[i - 1].meta_loss);
        CHECK(s.iteration == 1000);
    }
    SUBCASE("first-order steps follow a different trajectory") {
        MetaConfig c = toy_config();
        c.epochs = 10;
        const TrainState exact = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        c.first_order = true;
        const TrainState fo = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        CHECK(exact.history.back().meta_loss != fo.history.back().meta_loss);
    }
    SUBCASE("the plateau rule stops a run that no longer improves") {
        MetaConfig c = toy_config();
        c.epochs = 5000;
        c.plateau_window = 20;
        c.plateau_tol = 1e-9;
        const TrainState s = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        CHECK(s.plateaued);
        CHECK(s.iteration < 5000);
    }
    SUBCASE("a seeded run is bit-identical when repeated") {
        const TaskSampler random = [](Rng& rng, std::size_t count) {
            std::vector<MetaTask> out;
            for (std::size_t i = 0; i < count; ++i) out.push_back(quadratic({rng.normal(), rng.normal()}));
            return out;
        };
        MetaConfig c = toy_config();
        c.epochs = 50;
        const TrainState a = train_camel(c, random, start_at({1, 1}));
        const TrainState b = train_camel(c, random, start_at({1, 1}));
        CHECK(losses(a) == losses(b));
        CHECK(a.theta == b.theta);
        CHECK(a.rng == b.rng);
    }
    SUBCASE("resuming continues the history without a gap") {
        MetaConfig c = toy_config();
        c.epochs = 20;
        const TrainState whole = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        c.epochs = 8;
        const TrainState part = train_camel(c, fixed_sampler(cs), start_at({4, 4}));
        c.epochs = 20;
        const TrainState rest = train_camel(c, fixed_sampler(cs), part);
        CHECK(losses(rest) == losses(whole));
        CHECK(rest.theta == whole.theta);
    }
    SUBCASE("a blow-up reports the last finite state") {
        MetaConfig c = toy_config();
        c.beta = 1e6;
        c.epochs = 500;
        try {
            (void)train_camel(c, fixed_sampler(cs), start_at({4, 4}));
            FAIL("expected divergence");
        } catch (const TrainDiverged& e) {
            CHECK(e.last_good().theta.all_finite());
            CHECK(e.last_good().history.size() == e.last_good().iteration);
        }
    }
}

TEST_CASE("evaluate") {
    SUBCASE("an oracle classifier is perfect") {
        const OracleNet net(3);
        std::vector<Episode> eps;
        Rng rng(5);
        for (int e = 0; e < 4; ++e) {
            Episode ep = random_episode(rng, 3, 1, 4, 4);
            ep.classes = {4, 1, 2};
            for (std::size_t i = 0; i < ep.query_y.size(); ++i) ep.query_x[i * 4] = double(ep.query_y[i]);
            for (std::size_t i = 0; i < ep.support_y.size(); ++i) ep.support_x[i * 4] = double(ep.support_y[i]);
            eps.push_back(ep);
        }
        MetaConfig c;
        c.finetune_steps = 2;
        const EvalReport rep = evaluate(scalar_param({0, 0}), eps, net, c, 6);
        CHECK(rep.accuracy == 1.0);
        CHECK(rep.ci95 == 0.0);
        REQUIRE(rep.confusion.size() == 6);
        for (std::size_t r = 0; r < 6; ++r) {
            const bool used = r == 1 || r == 2 || r == 4;
            CHECK(rep.row_counts[r] == (used ? 16u : 0u));
            for (std::size_t k = 0; k < 6; ++k) CHECK(rep.confusion[r][k] == (used && r == k ? 100.0 : 0.0));
        }
    }
    SUBCASE("an untrained network without fine-tuning sits at chance") {
        signals::GenSpec g;
        g.frames_per_cell = 30;
        g.snrs_db = {10.0};
        g.frame_len = 32;
        g.seed = 3;
        const signals::FramePool pool = signals::generate_pool(g);
        layers::ArchConfig arch;
        arch.n_classes = 5;
        arch.frame_len = 32;
        arch.conv_channels = 4;
        arch.attn_dim = 4;
        arch.n_heads = 1;
        arch.fc_hidden = 4;
        const layers::CamelNet net(arch);
        Rng rng(17);
        const ParamSet theta = net.init_params(rng);
        std::vector<Episode> eps;
        for (int e = 0; e < 200; ++e) eps.push_back(signals::sample_episode(pool, 5, 1, 15, -100, 100, rng));
        MetaConfig c;
        c.finetune_steps = 0;
        const EvalReport rep = evaluate(theta, eps, net, c, pool.schemes.size());
        CHECK(rep.accuracy >= 0.16);
        CHECK(rep.accuracy <= 0.24);
        for (std::size_t r = 0; r < rep.confusion.size(); ++r) {
            if (rep.row_counts[r] == 0) continue;
            double s = 0;
            for (double v : rep.confusion[r]) s += v;
            CHECK(std::abs(s - 100.0) <= 1e-9);
        }
    }
}

TEST_CASE("mean_ci95") {
    const auto [m, ci] = mean_ci95({1.0, 2.0, 3.0, 4.0});
    CHECK(m == 2.5);
    CHECK(ci == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(mean_ci95({0.5}).second == 0.0);
}
