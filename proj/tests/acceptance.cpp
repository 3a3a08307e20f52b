// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--work DIR] [--ablation-epochs N]
//
// Criteria 6 and 7 train real networks and take minutes; the rest finish in seconds.
// Exit status is 0 when every selected criterion passes.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "camel/checkpoint.hpp"
#include "camel/commands.hpp"
#include "camel/config.hpp"
#include "camel/errors.hpp"
#include "camel/gradcheck.hpp"
#include "camel/layers.hpp"
#include "camel/meta.hpp"
#include "camel/signals.hpp"
#include "camel/wirtinger.hpp"

using namespace camel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

CTensor randn(Rng& rng, Shape s) {
    CTensor t(std::move(s));
    for (auto& z : t.data()) z = cplx(rng.normal(), rng.normal());
    return t;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

cli::RunConfig desk_config() { return cli::load_config(std::string(CAMEL_SOURCE_DIR) + "/configs/desk.cfg"); }

void outputs_into(cli::RunConfig& c, const fs::path& dir, const std::string& stem) {
    c.checkpoint = (dir / (stem + ".caml")).string();
    c.metrics = (dir / (stem + "_metrics.csv")).string();
    c.confusion = (dir / (stem + "_confusion.csv")).string();
}

// ---------------------------------------------------------------------------------------------

Outcome gradient_oracle() {
    const std::clock_t c0 = std::clock();
    const auto cases = cli::builtin_grad_cases();
    const auto rows = cli::run_gradcheck(cases, 20, 0, 1e-5);
    const double cpu = double(std::clock() - c0) / CLOCKS_PER_SEC;

    std::set<std::string> names;
    double worst = 0.0;
    std::string worst_op, failed;
    for (const auto& r : rows) {
        names.insert(r.name);
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_op = r.name;
        }
        if (!r.pass || r.instances != 20) failed += " " + r.name;
    }
    std::string missing;
    for (const char* need : {"cconv1d", "cfc", "c_softmax_abs", "c_softmax_re", "c_softmax_im", "c_attention", "c_mha",
                             "c_norm", "c_act_crelu", "c_act_ctanh", "c_act_csigmoid", "camel_forward"}) {
        if (!names.count(need)) missing += std::string(" ") + need;
    }
    Outcome o;
    o.pass = failed.empty() && missing.empty() && cpu <= 120.0;
    o.detail = fmt("%zu ops x 20 instances, worst rel err %.2e (%s), %.1f s CPU", rows.size(), worst, worst_op.c_str(),
                   cpu);
    if (!failed.empty()) o.detail += "; failed:" + failed;
    if (!missing.empty()) o.detail += "; missing:" + missing;
    return o;
}

Outcome chain_rule_necessity() {
    const auto rows = cli::toychain(200, 0.05);
    double naive_grad = 0.0, drift = 0.0;
    for (const auto& r : rows) {
        naive_grad = std::max(naive_grad, r.grad_naive);
        drift = std::max(drift, std::abs(r.j_naive - rows.front().j_naive));
    }
    const double j0 = rows.front().j_complex, j1 = rows.back().j_complex;
    Outcome o;
    o.pass = naive_grad == 0.0 && drift <= 1e-15 * j0 && j1 <= 0.5 * j0;
    o.detail = fmt("naive |grad| max %.1e, J drift %.1e; complex J %.4f -> %.4f (%.1f%% reduction)", naive_grad, drift, j0,
                   j1, 100.0 * (1.0 - j1 / j0));
    return o;
}

Outcome analyticity() {
    Rng rng(2024);
    auto eval = [](auto build, const std::vector<CTensor>& in) {
        ad::Tape t;
        std::vector<ad::Var> v;
        for (const auto& x : in) v.push_back(t.constant(x));
        return build(v).value();
    };
    const CTensor ka = randn(rng, {3, 1, 3}), kb = randn(rng, {3});
    const CTensor w = randn(rng, {6, 4}), wb = randn(rng, {4});
    const TensorFn conv = [&](const CTensor& x) {
        return eval([](auto& v) { return layers::cconv1d(v[0], v[1], v[2]); }, {x.reshaped({1, 1, 6}), ka, kb})
            .reshaped({12});
    };
    const TensorFn fc = [&](const CTensor& x) {
        return eval([](auto& v) { return layers::cfc(v[0], v[1], v[2]); }, {x, w, wb});
    };
    const TensorFn cj = [](const CTensor& x) { return conj(x); };
    // CReLU is analytic on the open set where every component has Re and Im of equal sign, so
    // the activation points are 32 wide; hitting that set by chance has probability 2^-32.
    auto act_fn = [&](ad::ActKind k) -> TensorFn {
        return [&eval, k](const CTensor& x) { return eval([k](auto& v) { return layers::c_act(v[0], k); }, {x}); };
    };
    const TensorFn absl = [&](const CTensor& x) {
        return eval([](auto& v) { return layers::lift(v[0], layers::Lift::Abs); }, {x});
    };
    int conv_ok = 0, fc_ok = 0, conj_fail = 0, act_fail = 0, abs_fail = 0;
    for (int i = 0; i < 20; ++i) {
        conv_ok += cr_check(conv, randn(rng, {6}), 1e-4);
        fc_ok += cr_check(fc, randn(rng, {6}), 1e-4);
        conj_fail += !cr_check(cj, randn(rng, {6}), 1e-4);
        bool every_act_fails = true;
        for (auto k : {ad::ActKind::CRelu, ad::ActKind::CTanh, ad::ActKind::CSigmoid})
            every_act_fails = every_act_fails && !cr_check(act_fn(k), randn(rng, {32}), 1e-4);
        act_fail += every_act_fails;
        abs_fail += !cr_check(absl, randn(rng, {6}), 1e-4);
    }
    Outcome o;
    o.pass = conv_ok == 20 && fc_ok == 20 && conj_fail == 20 && act_fail == 20 && abs_fail == 20;
    o.detail = fmt("analytic: cconv1d %d/20, cfc %d/20; rejected: conj %d/20, c_act (all kinds) %d/20, |.| lift %d/20", conv_ok,
                   fc_ok, conj_fail, act_fail, abs_fail);
    return o;
}

Outcome lemma1_ratio() {
    bool ok = true;
    double worst_diff = 0.0;
    std::string counts;
    for (std::size_t depth = 1; depth <= 4; ++depth) {
        for (std::size_t m : {1, 8, 64}) {
            const OpCount oc = opcount_compare(make_analytic_chain(depth), m);
            for (std::size_t k = 0; k < m; ++k) worst_diff = std::max(worst_diff, std::abs(oc.deriv_cd[k] - oc.deriv_iq[k]));
            ok = ok && oc.ratio() == 2.0;
            if (m == 8) counts += fmt(" d%zu:(%zu,%zu)", depth, oc.count_cd, oc.count_iq);
        }
    }
    Outcome o;
    o.pass = ok && worst_diff <= 1e-12;
    o.detail = fmt("ratio %s for depth 1-4, m in {1,8,64}; m=8 counts%s; max path diff %.1e",
                   ok ? "2.0 everywhere" : "NOT 2.0", counts.c_str(), worst_diff);
    return o;
}

Outcome lemma4_exactness() {
    // Quadratic family: closed form (1/B) sum (1 - 2a) 2 (theta' - c).
    const double alpha = 0.1;
    const cplx th0(0.3, -0.8);
    const std::vector<cplx> cs = {{1.0, 0.5}, {-0.7, 1.2}};
    std::vector<meta::MetaTask> quad;
    for (auto c : cs) {
        const LossFn f = [c](ad::Tape& t, std::span<const ad::Var> p) {
            const ad::Var d = ad::sub(p[0], t.constant(CTensor::scalar(c)));
            return ad::real(ad::mul(d, ad::conj(d)));
        };
        quad.push_back({f, f, {}, false});
    }
    ParamSet theta_q;
    theta_q.add("theta", CTensor::scalar(th0));
    cplx closed = 0.0;
    for (auto c : cs) closed += (1.0 - 2.0 * alpha) * 2.0 * ((th0 - 2.0 * alpha * (th0 - c)) - c);
    closed /= double(cs.size());
    const double quad_err = std::abs(meta::meta_gradient(theta_q, quad, alpha, 1).grad.tensor(0).item() - closed);

    // Small network, two episodes, ten random directions.
    layers::ArchConfig arch;
    arch.n_classes = 2;
    arch.frame_len = 8;
    arch.conv_channels = 3;
    arch.attn_dim = 4;
    arch.n_heads = 2;
    arch.fc_hidden = 3;
    arch.activation = ad::ActKind::CTanh;
    const layers::CamelNet net(arch);
    Rng rng(77);
    const ParamSet theta = net.init_params(rng);
    std::vector<meta::MetaTask> tasks;
    for (int b = 0; b < 2; ++b) {
        Episode ep;
        ep.n_way = 2;
        ep.k_shot = 2;
        ep.classes = {0, 1};
        ep.support_x = randn(rng, {4, 1, 8});
        ep.query_x = randn(rng, {6, 1, 8});
        ep.support_y = {0, 0, 1, 1};
        ep.query_y = {0, 0, 0, 1, 1, 1};
        tasks.push_back(meta::make_task(net, ep));
    }
    const meta::MetaGradient mg = meta::meta_gradient(theta, tasks, alpha, 1);
    double worst = 0.0;
    const double h = 1e-6;
    for (int d = 0; d < 10; ++d) {
        std::vector<CTensor> vals;
        for (const auto& e : theta) vals.push_back(randn(rng, e.second.shape()));
        const ParamSet v = theta.with_values(vals);
        const double fd = (meta::meta_objective(theta + v.scaled(h), tasks, alpha, 1) -
                           meta::meta_objective(theta - v.scaled(h), tasks, alpha, 1)) /
                          (2 * h);
        const double an = mg.grad.vdot(v).real();
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    }
    Outcome o;
    o.pass = theta.numel() <= 500 && worst <= 1e-4 && quad_err <= 1e-10 && mg.hvp_calls == 4;
    o.detail = fmt("network (%zu params, B=2): worst directional rel err %.1e over 10 directions, %zu HVPs; "
                   "quadratic closed-form err %.1e",
                   theta.numel(), worst, mg.hvp_calls, quad_err);
    return o;
}

struct RunResult {
    double acc = 0.0, ci = 0.0;
    double base = 0.0, base_ci = 0.0;
    std::size_t iterations = 0, episodes = 0;
    double seconds = 0.0;
    bool diverged = false;
};

/// Trains `cfg` from scratch, then scores the result and the seed's untrained initialization on
/// the shared evaluation episodes.
RunResult train_and_score(const cli::RunConfig& cfg, bool score_baseline) {
    const auto t0 = std::chrono::steady_clock::now();
    const cli::TrainOutcome out = cli::run_training(cfg, std::nullopt, true);
    RunResult r;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.iterations = out.state.iteration;
    r.diverged = out.diverged;
    const layers::CamelNet net(cli::effective_arch(cfg));
    const cli::TaskData data = cli::load_task_data(cfg);
    const auto eps = cli::eval_episodes(data.test, cfg);
    r.episodes = eps.size();
    const auto rep = meta::evaluate(out.state.theta, eps, net, cfg.meta, data.test.schemes.size());
    r.acc = rep.accuracy;
    r.ci = rep.ci95;
    if (score_baseline) {
        const auto b = meta::evaluate(cli::init_theta(net, cfg.meta.seed), eps, net, cfg.meta, data.test.schemes.size());
        r.base = b.accuracy;
        r.base_ci = b.ci95;
    }
    return r;
}

Outcome desk_learning(const fs::path& work) {
    cli::RunConfig cfg = desk_config();
    outputs_into(cfg, work, "desk");
    const RunResult r = train_and_score(cfg, true);
    Outcome o;
    o.pass = !r.diverged && r.iterations <= 20000 && r.seconds <= 1800.0 && r.episodes >= 200 && r.acc >= 0.70 &&
             r.acc - r.base >= 0.20;
    o.detail = fmt("%zu iterations in %.0f s; post-adaptation acc %.3f +- %.3f vs frozen init %.3f +- %.3f "
                   "(+%.1f pp) over %zu episodes",
                   r.iterations, r.seconds, r.acc, r.ci, r.base, r.base_ci, 100.0 * (r.acc - r.base), r.episodes);
    return o;
}

struct Variant {
    const char* name;
    bool attention;
    bool real_valued;
};

constexpr Variant kVariants[] = {
    {"camel", true, false},
    {"complex_only", false, false},
    {"attention_only", true, true},
    {"plain", false, true},
};

/// One-sided sign test: probability of at least `losses` losses in `n` fair coin flips.
double sign_p(int losses, int n) {
    double p = 0.0;
    for (int k = losses; k <= n; ++k) p += std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0));
    return p / std::pow(2.0, n);
}

Outcome ablation_order(const fs::path& work, std::size_t epochs) {
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<std::vector<RunResult>> res(std::size(kVariants));
    std::ofstream table(work / "ablation.csv");
    table << "variant,seed,iterations,accuracy,ci95,seconds\n";
    for (std::size_t v = 0; v < std::size(kVariants); ++v) {
        for (auto seed : seeds) {
            cli::RunConfig cfg = desk_config();
            cfg.meta.epochs = epochs;
            cfg.meta.seed = seed;
            cfg.arch.use_attention = kVariants[v].attention;
            cfg.arch.real_valued = kVariants[v].real_valued;
            cfg.checkpoint_every = 0;
            outputs_into(cfg, work, fmt("ablation_%s_%llu", kVariants[v].name, (unsigned long long)seed));
            const RunResult r = train_and_score(cfg, false);
            res[v].push_back(r);
            table << kVariants[v].name << ',' << seed << ',' << r.iterations << ',' << cli::format_double(r.acc) << ','
                  << cli::format_double(r.ci) << ',' << fmt("%.1f", r.seconds) << '\n';
            table.flush();
            std::cerr << fmt("  ablation %-15s seed %llu: acc %.3f +- %.3f (%.0f s)\n", kVariants[v].name,
                             (unsigned long long)seed, r.acc, r.ci, r.seconds);
        }
    }

    // X >= Y holds unless Y is ahead beyond the noise: the mean gap is below minus its CI
    // (ties within CI allowed), or the per-seed sign test rejects X >= Y at 5 %.
    const std::pair<int, int> order[] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
    bool all = true;
    std::string detail = "means";
    for (std::size_t v = 0; v < std::size(kVariants); ++v) {
        double m = 0;
        for (const auto& r : res[v]) m += r.acc;
        detail += fmt(" %s=%.3f", kVariants[v].name, m / double(seeds.size()));
    }
    for (auto [x, y] : order) {
        std::vector<double> d;
        int wins = 0, losses = 0;
        double margin_sum = 0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const RunResult &a = res[static_cast<std::size_t>(x)][s], &b = res[static_cast<std::size_t>(y)][s];
            const double margin = std::hypot(a.ci, b.ci);
            margin_sum += margin;
            d.push_back(a.acc - b.acc);
            if (a.acc - b.acc > margin) ++wins;
            if (b.acc - a.acc > margin) ++losses;
        }
        const auto [mean_d, ci_d] = meta::mean_ci95(d);
        const double tie = std::max(ci_d, margin_sum / double(seeds.size()));
        const double p = wins + losses > 0 ? sign_p(losses, wins + losses) : 1.0;
        const bool holds = mean_d >= -tie && p >= 0.05;
        all = all && holds;
        detail += fmt("; %s>=%s %s (gap %+.3f, tie %.3f, %d-%d)", kVariants[x].name, kVariants[y].name,
                      holds ? "ok" : "VIOLATED", mean_d, tie, wins, losses);
    }
    bool diverged = false;
    for (const auto& v : res)
        for (const auto& r : v) diverged = diverged || r.diverged;
    Outcome o;
    o.pass = all && !diverged;
    o.detail = fmt("%zu iterations x 5 seeds; ", epochs) + detail;
    return o;
}

Outcome reproducibility(const fs::path& work) {
    cli::RunConfig cfg = desk_config();
    cfg.meta.epochs = 25;
    cfg.checkpoint_every = 10;
    cfg.meta.meta_batch = 4;
    std::ostringstream sink;
    ::setenv("CAMEL_THREADS", "1", 1);
    outputs_into(cfg, work, "repro_a");
    const int ca = cli::cmd_train(cfg, "", sink);
    ::setenv("CAMEL_THREADS", "4", 1);
    outputs_into(cfg, work, "repro_b");
    const int cb = cli::cmd_train(cfg, "", sink);
    ::unsetenv("CAMEL_THREADS");
    const bool same_metrics = slurp((work / "repro_a_metrics.csv").string()) == slurp((work / "repro_b_metrics.csv").string());
    const bool same_ckpt = slurp((work / "repro_a.caml").string()) == slurp((work / "repro_b.caml").string());
    cfg.meta.seed += 1;
    outputs_into(cfg, work, "repro_c");
    (void)cli::cmd_train(cfg, "", sink);
    const bool seed_matters = slurp((work / "repro_a_metrics.csv").string()) != slurp((work / "repro_c_metrics.csv").string());
    Outcome o;
    o.pass = ca == 0 && cb == 0 && same_metrics && same_ckpt && seed_matters;
    o.detail = fmt("two 25-iteration runs (1 and 4 worker threads): metrics %s, checkpoint %s; another seed %s",
                   same_metrics ? "byte-identical" : "DIFFER", same_ckpt ? "byte-identical" : "DIFFER",
                   seed_matters ? "changes the metrics" : "does NOT change the metrics");
    return o;
}

int run_camel(const std::string& args) {
    const int status = std::system((std::string(CAMEL_BIN_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome format_roundtrips(const fs::path& work) {
    std::ostringstream sink;
    cli::RunConfig cfg = desk_config();
    cfg.frames_per_cell = 10;
    const std::string a = (work / "frames_a.csig").string(), b = (work / "frames_b.csig").string();
    cli::cmd_gen(cfg, a, sink);
    signals::save_frames(b, signals::load_frames(a));
    const bool csig_same = slurp(a) == slurp(b) && !slurp(a).empty();

    cfg.meta.epochs = 3;
    outputs_into(cfg, work, "fmt");
    cli::cmd_train(cfg, "", sink);
    const std::string ck2 = (work / "fmt_copy.caml").string();
    cli::save_checkpoint(ck2, cli::load_checkpoint(cfg.checkpoint));
    const bool caml_same = slurp(cfg.checkpoint) == slurp(ck2);

    auto corrupt = [&](const std::string& src, const std::string& dst) {
        std::string bytes = slurp(src);
        bytes[0] ^= 0x20;
        std::ofstream(dst, std::ios::binary) << bytes;
    };
    const std::string bad_csig = (work / "bad.csig").string(), bad_caml = (work / "bad.caml").string();
    corrupt(a, bad_csig);
    corrupt(cfg.checkpoint, bad_caml);
    auto kind = [](auto&& f) {
        try {
            f();
        } catch (const FormatError& e) {
            return e.kind();
        }
        return FormatError::Kind::Io;
    };
    const bool typed = kind([&] { signals::load_frames(bad_csig); }) == FormatError::Kind::BadMagic &&
                       kind([&] { cli::load_checkpoint(bad_caml); }) == FormatError::Kind::BadMagic;
    const std::string base = "--config " + std::string(CAMEL_SOURCE_DIR) + "/configs/desk.cfg --set confusion=" +
                             (work / "x.csv").string();
    const int exit_caml = run_camel(base + " eval --checkpoint " + bad_caml);
    const int exit_csig = run_camel(base + " --set data=" + bad_csig + " eval --checkpoint " + cfg.checkpoint);
    Outcome o;
    o.pass = csig_same && caml_same && typed && exit_caml == 3 && exit_csig == 3;
    o.detail = fmt("CSIG save-load-save %s, CAML save-load-save %s; corrupted magic: typed %s, exit codes %d/%d",
                   csig_same ? "identical" : "DIFFERS", caml_same ? "identical" : "DIFFERS",
                   typed ? "bad-magic errors" : "WRONG error kind", exit_csig, exit_caml);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::string work = "accept_work";
    std::size_t ablation_epochs = 600;
    app.add_option("--only", only, "run just these criteria (1-9)")->check(CLI::Range(1, 9));
    app.add_option("--work", work, "directory for checkpoints, metrics and tables");
    app.add_option("--ablation-epochs", ablation_epochs, "meta-iterations per ablation run");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir(work);
    fs::create_directories(dir);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient oracle suite", gradient_oracle},
        {"complex chain rule necessity", chain_rule_necessity},
        {"analyticity checks", analyticity},
        {"Lemma 1 cost ratio", lemma1_ratio},
        {"Lemma 4 meta-gradient exactness", lemma4_exactness},
        {"desk-scale few-shot learning", [&] { return desk_learning(dir); }},
        {"ablation ordering", [&] { return ablation_order(dir, ablation_epochs); }},
        {"reproducibility", [&] { return reproducibility(dir); }},
        {"format round-trips", [&] { return format_roundtrips(dir); }},
    };

    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << "criterion " << n << " [" << (o.pass ? "PASS" : "FAIL") << "] " << criteria[i].first << ": "
                  << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
