// camel: command-line front end for the complex-valued meta-learning library.
//
//   camel gradcheck     finite-difference check of every primitive and layer
//   camel toychain      complex vs naive chain rule on J = |exp(-(x*)^2)|
//   camel bench-lemma1  multiplication counts of complex vs real-block derivatives
//   camel gen           write a synthetic CSIG frame file
//   camel train         meta-train and write checkpoint + metrics CSV
//   camel eval          fine-tune on test episodes and report accuracy + confusion
//
// Exit codes: 0 ok, 1 validation failure, 2 divergence, 3 I/O or configuration error.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "camel/commands.hpp"

using namespace camel;

int main(int argc, char** argv) {
    CLI::App app{"Complex-valued meta-learning toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--set", overrides, "extra key=value setting, applied after the config file");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every primitive and layer");
    std::string corrupt;
    gradcheck->add_option("--corrupt", corrupt, "negative control: scale the analytic gradient of this op by 1.5");

    auto* toychain = app.add_subcommand("toychain", "complex vs naive chain rule on the toy network");
    std::string toy_csv = "toychain.csv";
    std::optional<std::size_t> toy_steps;
    std::optional<double> toy_lr;
    toychain->add_option("--out", toy_csv, "CSV file for both loss trajectories");
    toychain->add_option("--steps", toy_steps, "gradient steps");
    toychain->add_option("--lr", toy_lr, "step size");

    auto* bench = app.add_subcommand("bench-lemma1", "derivative multiplication counts, CD vs IQ");
    std::optional<std::size_t> bench_m, bench_depth;
    bench->add_option("--m", bench_m, "vector length");
    bench->add_option("--depth", bench_depth, "chain-rule compositions");

    auto* gen = app.add_subcommand("gen", "write a synthetic CSIG frame file");
    std::string gen_out;
    gen->add_option("--out", gen_out, "output path")->required();

    auto* train = app.add_subcommand("train", "meta-train a network");
    std::string resume;
    bool first_order = false, no_attention = false, real_valued = false;
    train->add_option("--resume", resume, "continue from this checkpoint");
    train->add_flag("--first-order", first_order, "drop the Hessian terms of the outer gradient");
    train->add_flag("--no-attention", no_attention, "remove the attention block");
    train->add_flag("--real-valued", real_valued, "real weights on stacked I/Q channels");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on test episodes");
    std::string eval_ckpt;
    bool frozen = false;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate (default: config 'checkpoint')");
    eval->add_flag("--frozen-init", frozen, "score the seed's untrained initialization instead");
    eval->add_flag("--no-attention", no_attention, "architecture without the attention block");
    eval->add_flag("--real-valued", real_valued, "real-valued architecture");

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunConfig cfg;
        if (!config_path.empty()) cfg = cli::load_config(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set '" + kv + "': expected key=value");
            cli::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1), "--set");
        }
        if (seed) cfg.meta.seed = *seed;
        if (first_order) cfg.meta.first_order = true;
        if (no_attention) cfg.arch.use_attention = false;
        if (real_valued) cfg.arch.real_valued = true;

        if (*gradcheck) return cli::cmd_gradcheck(cfg, corrupt, std::cout);
        if (*toychain) {
            if (toy_steps) cfg.toy_steps = *toy_steps;
            if (toy_lr) cfg.toy_lr = *toy_lr;
            return cli::cmd_toychain(cfg, toy_csv, std::cout);
        }
        if (*bench) return cli::cmd_bench_lemma1(bench_m.value_or(cfg.bench_m), bench_depth.value_or(cfg.bench_depth), std::cout);
        if (*gen) return cli::cmd_gen(cfg, gen_out, std::cout);
        if (*train) {
            cfg.meta.validate();
            cli::effective_arch(cfg).validate();
            return cli::cmd_train(cfg, resume, std::cout);
        }
        if (*eval) return cli::cmd_eval(cfg, eval_ckpt.empty() ? cfg.checkpoint : eval_ckpt, frozen, std::cout);
    } catch (const FormatError& e) {
        std::cerr << "error (" << format_error_kind(e.kind()) << "): " << e.what() << '\n';
        return cli::kIoOrConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kIoOrConfig;
    } catch (const meta::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return cli::kDiverged;
    } catch (const ad::NonFiniteLoss& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return cli::kDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kIoOrConfig;
    }
    return cli::kOk;
}
