#include "camel/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>

#include "camel/bytes.hpp"
#include "camel/gradcheck.hpp"

namespace camel::cli {

using ad::Tape;
using ad::Var;

std::vector<CTensor> naive_gradient(Tape& tape, const Var& loss, std::span<const Var> wrt) {
    std::map<int, CTensor> cot;
    cot[loss.id()] = CTensor(loss.shape(), cplx(0.5, 0.0));
    for (int id = loss.id(); id >= 0; --id) {
        const auto it = cot.find(id);
        if (it == cot.end()) continue;
        const ad::TapeNode& n = tape.node(id);
        if (!n.requires_grad || !n.vjp) continue;
        const ad::Sensitivities s = tape.sensitivities(id, it->second);
        for (std::size_t k = 0; k < s.direct.size(); ++k) {
            const int in = n.inputs[k];
            if (!tape.node(in).requires_grad) continue;
            auto [slot, fresh] = cot.try_emplace(in, s.direct[k]);
            if (!fresh) slot->second = add(slot->second, s.direct[k]);
        }
    }
    std::vector<CTensor> out;
    for (const auto& w : wrt) {
        const auto it = cot.find(w.id());
        out.push_back(it == cot.end() ? CTensor(w.shape()) : scale(it->second, 2.0));
    }
    return out;
}

namespace {

Var toy_j(const Var& x) {
    const Var h1 = ad::conj(x);
    const Var h2 = ad::mul(h1, h1);
    return ad::abs(ad::exp(ad::scale(h2, -1.0)));
}

}  // namespace

std::vector<ToyRow> toychain(std::size_t steps, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("toychain: lr must be positive");
    cplx xc(0.5, 0.5), xn(0.5, 0.5);
    std::vector<ToyRow> rows;
    for (std::size_t s = 0; s <= steps; ++s) {
        ToyRow r;
        r.step = s;
        cplx gc, gn;
        {
            Tape t;
            const Var x = t.leaf(CTensor::scalar(xc));
            const Var j = toy_j(x);
            r.j_complex = j.value().item().real();
            gc = complex_gradient(t, j, x).item();
        }
        {
            Tape t;
            const Var x = t.leaf(CTensor::scalar(xn));
            const Var j = toy_j(x);
            r.j_naive = j.value().item().real();
            const Var w[] = {x};
            gn = naive_gradient(t, j, w).front().item();
        }
        r.grad_complex = std::abs(gc);
        r.grad_naive = std::abs(gn);
        rows.push_back(r);
        xc -= lr * gc;
        xn -= lr * gn;
    }
    return rows;
}

std::string toychain_csv(const std::vector<ToyRow>& rows) {
    std::string s = "step,j_complex,j_naive,grad_complex,grad_naive\n";
    for (const auto& r : rows) {
        s += std::to_string(r.step) + ',' + format_double(r.j_complex) + ',' + format_double(r.j_naive) + ',' +
             format_double(r.grad_complex) + ',' + format_double(r.grad_naive) + '\n';
    }
    return s;
}

// ---------------------------------------------------------------------------------------------

layers::ArchConfig effective_arch(const RunConfig& cfg) {
    layers::ArchConfig a = cfg.arch;
    a.n_classes = cfg.meta.n_way;
    return a;
}

TaskData load_task_data(const RunConfig& cfg) {
    signals::FramePool pool;
    if (!cfg.data.empty()) {
        pool = signals::load_frames(cfg.data);
    } else {
        signals::GenSpec g;
        g.schemes = cfg.schemes;
        g.snrs_db = cfg.snrs_db;
        g.frames_per_cell = cfg.frames_per_cell;
        g.frame_len = cfg.arch.frame_len;
        g.sps = cfg.sps;
        g.seed = cfg.data_seed;
        pool = signals::generate_pool(g);
    }
    const signals::Split sp = signals::scenario_split(pool, cfg.scenario, cfg.data_seed);
    return {signals::filter_snr(sp.train, cfg.train_snr_min, cfg.train_snr_max),
            signals::filter_snr(sp.test, cfg.test_snr_min, cfg.test_snr_max)};
}

ParamSet init_theta(const layers::CamelNet& net, std::uint64_t seed) {
    Rng rng = Rng(seed).split(1);
    return net.init_params(rng);
}

meta::TaskSampler make_sampler(const layers::CamelNet& net, const signals::FramePool& pool, const RunConfig& cfg) {
    const auto shared = std::make_shared<const signals::FramePool>(pool);
    const layers::CamelNet* n = &net;
    const std::size_t n_way = cfg.meta.n_way, k = cfg.meta.k_shot, q = cfg.meta.q_size;
    return [n, shared, n_way, k, q](Rng& rng, std::size_t count) {
        std::vector<meta::MetaTask> tasks;
        for (std::size_t i = 0; i < count; ++i) {
            tasks.push_back(meta::make_task(*n, signals::sample_episode(*shared, n_way, k, q, -1e9, 1e9, rng)));
        }
        return tasks;
    };
}

std::vector<Episode> eval_episodes(const signals::FramePool& pool, const RunConfig& cfg) {
    Rng rng = Rng(cfg.data_seed).split(3);
    std::vector<Episode> eps;
    for (std::size_t i = 0; i < cfg.eval_episodes; ++i) {
        eps.push_back(signals::sample_episode(pool, cfg.meta.n_way, cfg.meta.k_shot, cfg.meta.q_size, -1e9, 1e9, rng));
    }
    return eps;
}

Checkpoint to_checkpoint(const layers::ArchConfig& arch, const meta::TrainState& st) {
    Checkpoint ck;
    ck.arch = arch;
    ck.theta = st.theta;
    ck.iteration = st.iteration;
    ck.rng = st.rng;
    ck.history = st.history;
    return ck;
}

TrainOutcome run_training(const RunConfig& cfg, const std::optional<Checkpoint>& resume, bool save) {
    const layers::ArchConfig arch = effective_arch(cfg);
    const layers::CamelNet net(arch);
    const TaskData data = load_task_data(cfg);

    meta::TrainState start;
    if (resume) {
        if (!(resume->arch == arch)) throw ConfigError("resume: checkpoint architecture does not match the config");
        start.theta = resume->theta;
        start.iteration = resume->iteration;
        start.rng = resume->rng;
        start.history = resume->history;
    } else {
        start.theta = init_theta(net, cfg.meta.seed);
        start.rng = Rng(cfg.meta.seed).split(2).state();
    }

    meta::TrainCallback cb;
    if (save && cfg.checkpoint_every > 0) {
        cb = [&](const meta::TrainState& st) {
            if (st.iteration % cfg.checkpoint_every == 0) save_checkpoint(cfg.checkpoint, to_checkpoint(arch, st));
        };
    }
    TrainOutcome out;
    try {
        out.state = meta::train_camel(cfg.meta, make_sampler(net, data.train, cfg), std::move(start), cb);
    } catch (const meta::TrainDiverged& e) {
        out.state = e.last_good();
        out.diverged = true;
        out.message = e.what();
    }
    if (save) {
        save_checkpoint(cfg.checkpoint, to_checkpoint(arch, out.state));
        const std::string csv = history_csv(out.state.history);
        bytes::write_file(cfg.metrics, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

int cmd_gradcheck(const RunConfig& cfg, const std::string& corrupt, std::ostream& out) {
    const auto cases = builtin_grad_cases();
    if (!corrupt.empty()) {
        bool known = false;
        for (const auto& c : cases) known = known || c.name == corrupt;
        if (!known) throw ConfigError("gradcheck: --corrupt names unknown op '" + corrupt + "'");
    }
    const auto rows = run_gradcheck(cases, cfg.gradcheck_instances, cfg.meta.seed, cfg.gradcheck_tol, corrupt);
    out << std::left << std::setw(24) << "op" << std::setw(14) << "max_rel_err" << "status\n";
    int code = kOk;
    std::string failed;
    for (const auto& r : rows) {
        out << std::setw(24) << r.name << std::setw(14) << std::scientific << std::setprecision(3) << r.max_rel_error
            << (r.pass ? "ok" : "FAIL") << '\n';
        if (!r.pass) {
            code = kValidationFailed;
            failed += (failed.empty() ? "" : ", ") + r.name;
        }
    }
    out << std::defaultfloat;
    if (code == kOk) {
        out << "gradcheck: all " << rows.size() << " ops within " << cfg.gradcheck_tol << " over "
            << cfg.gradcheck_instances << " instances\n";
    } else {
        out << "gradcheck: FAILED ops: " << failed << '\n';
    }
    return code;
}

int cmd_toychain(const RunConfig& cfg, const std::string& csv_path, std::ostream& out) {
    const auto rows = toychain(cfg.toy_steps, cfg.toy_lr);
    const std::string csv = toychain_csv(rows);
    if (!csv_path.empty()) {
        bytes::write_file(csv_path, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    }
    double naive_max_grad = 0.0, naive_drift = 0.0;
    for (const auto& r : rows) {
        naive_max_grad = std::max(naive_max_grad, r.grad_naive);
        naive_drift = std::max(naive_drift, std::abs(r.j_naive - rows.front().j_naive));
    }
    out << "toychain: J = |exp(-(x*)^2)| from x0 = 0.5+0.5j, lr = " << cfg.toy_lr << ", " << cfg.toy_steps
        << " steps\n"
        << "  complex rule: J " << rows.front().j_complex << " -> " << rows.back().j_complex << '\n'
        << "  naive rule:   J " << rows.front().j_naive << " -> " << rows.back().j_naive
        << " (max |grad| " << naive_max_grad << ", max drift " << naive_drift << ")\n";
    if (!csv_path.empty()) out << "  trajectories written to " << csv_path << '\n';
    return kOk;
}

int cmd_bench_lemma1(std::size_t m, std::size_t depth, std::ostream& out) {
    if (m < 1 || depth < 1) throw ConfigError("bench-lemma1: m and depth must be at least 1");
    const OpCount oc = opcount_compare(make_analytic_chain(depth), m);
    double diff = 0.0;
    for (std::size_t k = 0; k < m; ++k) diff = std::max(diff, std::abs(oc.deriv_cd[k] - oc.deriv_iq[k]));
    out << "m=" << m << " depth=" << depth << " count_cd=" << oc.count_cd << " count_iq=" << oc.count_iq
        << " ratio=" << format_double(oc.ratio()) << " max_deriv_diff=" << diff << '\n';
    return oc.ratio() == 2.0 && diff <= 1e-12 ? kOk : kValidationFailed;
}

int cmd_gen(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
    signals::GenSpec g;
    g.schemes = cfg.schemes;
    g.snrs_db = cfg.snrs_db;
    g.frames_per_cell = cfg.frames_per_cell;
    g.frame_len = cfg.arch.frame_len;
    g.sps = cfg.sps;
    g.seed = cfg.data_seed;
    const signals::FramePool pool = signals::generate_pool(g);
    signals::save_frames(out_path, pool);
    out << "wrote " << pool.frames.size() << " frames (" << pool.schemes.size() << " schemes x " << g.snrs_db.size()
        << " SNRs x " << g.frames_per_cell << ") to " << out_path << '\n';
    return kOk;
}

int cmd_train(const RunConfig& cfg, const std::string& resume_path, std::ostream& out) {
    std::optional<Checkpoint> resume;
    if (!resume_path.empty()) resume = load_checkpoint(resume_path);
    const TrainOutcome res = run_training(cfg, resume, true);
    const auto& st = res.state;
    if (res.diverged) {
        out << "train: " << res.message << "\n  last good checkpoint (iteration " << st.iteration
            << "): " << cfg.checkpoint << '\n';
        return kDiverged;
    }
    out << "train: " << st.iteration << " iterations" << (st.plateaued ? " (stopped on plateau)" : "");
    if (!st.history.empty()) {
        out << ", last meta-loss " << st.history.back().meta_loss << ", last query acc " << st.history.back().query_acc;
    }
    out << "\n  checkpoint: " << cfg.checkpoint << "\n  metrics: " << cfg.metrics << '\n';
    return kOk;
}

std::string confusion_csv(const meta::EvalReport& rep, const std::vector<std::string>& names) {
    std::string s = "actual\\predicted";
    for (const auto& n : names) s += ',' + n;
    s += '\n';
    for (std::size_t r = 0; r < rep.confusion.size(); ++r) {
        s += r < names.size() ? names[r] : std::to_string(r);
        for (double v : rep.confusion[r]) s += ',' + format_double(v);
        s += '\n';
    }
    return s;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, bool frozen_init, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const layers::ArchConfig arch = effective_arch(cfg);
    if (!(ck.arch == arch)) {
        throw ConfigError("eval: checkpoint architecture does not match the config:\n--- checkpoint\n" +
                          arch_to_text(ck.arch) + "--- config\n" + arch_to_text(arch));
    }
    const layers::CamelNet net(arch);
    const TaskData data = load_task_data(cfg);
    const auto eps = eval_episodes(data.test, cfg);
    const ParamSet theta = frozen_init ? init_theta(net, cfg.meta.seed) : ck.theta;
    const meta::EvalReport rep = meta::evaluate(theta, eps, net, cfg.meta, data.test.schemes.size());
    const std::string csv = confusion_csv(rep, data.test.schemes);
    bytes::write_file(cfg.confusion, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    char line[128];
    std::snprintf(line, sizeof line, "accuracy %.4f ± %.4f over %zu episodes%s\n", rep.accuracy, rep.ci95, eps.size(),
                  frozen_init ? " (frozen initialization)" : "");
    out << line << "confusion matrix (percent): " << cfg.confusion << '\n';
    return kOk;
}

}  // namespace camel::cli
