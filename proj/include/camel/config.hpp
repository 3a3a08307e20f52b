#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camel/errors.hpp"
#include "camel/layers.hpp"
#include "camel/meta.hpp"
#include "camel/signals.hpp"

namespace camel::cli {

/// Everything a command needs, merged from a key=value file and command-line overrides.
/// Every field has a default, so an empty file is a valid configuration.
struct RunConfig {
    meta::MetaConfig meta;
    layers::ArchConfig arch;

    // Task data: read `data` when set, otherwise generate from the fields below.
    std::string data;
    std::uint64_t data_seed = 7;
    std::vector<signals::Scheme> schemes = signals::all_schemes();
    std::vector<double> snrs_db = {10.0, 14.0, 18.0};
    std::size_t frames_per_cell = 120;
    std::size_t sps = 8;
    signals::Scenario scenario = signals::Scenario::SnrGe0;
    double train_snr_min = 10.0;
    double train_snr_max = 1000.0;
    double test_snr_min = 10.0;
    double test_snr_max = 1000.0;
    std::size_t eval_episodes = 200;

    // Outputs.
    std::string checkpoint = "camel.ckpt";
    std::string metrics = "metrics.csv";
    std::string confusion = "confusion.csv";
    std::size_t checkpoint_every = 100;

    // Diagnostics.
    std::size_t gradcheck_instances = 20;
    double gradcheck_tol = 1e-5;
    std::size_t toy_steps = 200;
    double toy_lr = 0.05;
    std::size_t bench_m = 8;
    std::size_t bench_depth = 1;
};

/// Applies one key=value assignment. `where` prefixes error messages (e.g. "run.cfg:12").
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

/// Parses a config text: one `key = value` per line, `#` starts a comment, blank lines ignored.
/// Unknown keys and malformed values raise ConfigError naming the key and line.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>", RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Canonical key=value text of the architecture, stable under a parse round trip.
std::string arch_to_text(const layers::ArchConfig& arch);
layers::ArchConfig arch_from_text(const std::string& text);

/// Shortest decimal that reads back to exactly the same double.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& where);

}  // namespace camel::cli
