#include "camel/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace camel::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& where, const std::string& key, const std::string& msg) {
    throw ConfigError(where + ": key '" + key + "': " + msg);
}

std::size_t to_size(const std::string& v, const std::string& where, const std::string& key) {
    std::size_t out = 0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end) bad(where, key, "expected a non-negative integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& where, const std::string& key) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end) bad(where, key, "expected an unsigned integer, got '" + v + "'");
    return out;
}

double to_real(const std::string& v, const std::string& where, const std::string& key) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out)) {
        bad(where, key, "expected a finite number, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& v, const std::string& where, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad(where, key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string& where, const std::string& key)>;

template <class F>
Setter guarded(F f) {
    return [f](RunConfig& c, const std::string& v, const std::string& where, const std::string& key) {
        try {
            f(c, v, where, key);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            bad(where, key, e.what());
        }
    };
}

#define SIZE_KEY(name, field) \
    {name, guarded([](RunConfig& c, auto& v, auto& w, auto& k) { c.field = to_size(v, w, k); })}
#define REAL_KEY(name, field) \
    {name, guarded([](RunConfig& c, auto& v, auto& w, auto& k) { c.field = to_real(v, w, k); })}
#define BOOL_KEY(name, field) \
    {name, guarded([](RunConfig& c, auto& v, auto& w, auto& k) { c.field = to_bool(v, w, k); })}
#define STR_KEY(name, field) \
    {name, guarded([](RunConfig& c, auto& v, auto&, auto&) { c.field = v; })}

meta::AdaptiveBetaConfig& adaptive(RunConfig& c) {
    if (!c.meta.adaptive_beta) c.meta.adaptive_beta = meta::AdaptiveBetaConfig{};
    return *c.meta.adaptive_beta;
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        // meta-learning
        REAL_KEY("alpha", meta.alpha),
        REAL_KEY("beta", meta.beta),
        SIZE_KEY("meta_batch", meta.meta_batch),
        SIZE_KEY("inner_steps", meta.inner_steps),
        SIZE_KEY("finetune_steps", meta.finetune_steps),
        {"n_way", guarded([](RunConfig& c, auto& v, auto& w, auto& k) {
             c.meta.n_way = to_size(v, w, k);
             c.arch.n_classes = c.meta.n_way;
         })},
        SIZE_KEY("k_shot", meta.k_shot),
        SIZE_KEY("q_size", meta.q_size),
        SIZE_KEY("epochs", meta.epochs),
        BOOL_KEY("first_order", meta.first_order),
        {"seed", guarded([](RunConfig& c, auto& v, auto& w, auto& k) { c.meta.seed = to_u64(v, w, k); })},
        {"outer_optimizer",
         guarded([](RunConfig& c, auto& v, auto&, auto&) { c.meta.outer_optimizer = meta::parse_optimizer(v); })},
        REAL_KEY("adam_beta1", meta.adam_beta1),
        REAL_KEY("adam_beta2", meta.adam_beta2),
        REAL_KEY("adam_eps", meta.adam_eps),
        SIZE_KEY("plateau_window", meta.plateau_window),
        REAL_KEY("plateau_tol", meta.plateau_tol),
        {"adaptive_L", guarded([](RunConfig& c, auto& v, auto& w, auto& k) { adaptive(c).L = to_real(v, w, k); })},
        {"adaptive_rho", guarded([](RunConfig& c, auto& v, auto& w, auto& k) { adaptive(c).rho = to_real(v, w, k); })},
        {"adaptive_tasks",
         guarded([](RunConfig& c, auto& v, auto& w, auto& k) { adaptive(c).tasks = to_size(v, w, k); })},
        {"adaptive_batch",
         guarded([](RunConfig& c, auto& v, auto& w, auto& k) { adaptive(c).batch = to_size(v, w, k); })},
        // architecture
        SIZE_KEY("frame_len", arch.frame_len),
        SIZE_KEY("conv_channels", arch.conv_channels),
        SIZE_KEY("attn_dim", arch.attn_dim),
        SIZE_KEY("n_heads", arch.n_heads),
        {"softmax_lift",
         guarded([](RunConfig& c, auto& v, auto&, auto&) { c.arch.softmax_lift = layers::parse_lift(v); })},
        {"activation", guarded([](RunConfig& c, auto& v, auto&, auto&) { c.arch.activation = ad::parse_act(v); })},
        SIZE_KEY("conv_kernel", arch.conv_kernel),
        SIZE_KEY("conv_stride", arch.conv_stride),
        SIZE_KEY("conv_blocks", arch.conv_blocks),
        SIZE_KEY("fc_blocks", arch.fc_blocks),
        SIZE_KEY("fc_hidden", arch.fc_hidden),
        BOOL_KEY("use_attention", arch.use_attention),
        BOOL_KEY("real_valued", arch.real_valued),
        REAL_KEY("norm_eps", arch.norm_eps),
        // data
        STR_KEY("data", data),
        {"data_seed", guarded([](RunConfig& c, auto& v, auto& w, auto& k) { c.data_seed = to_u64(v, w, k); })},
        {"schemes", guarded([](RunConfig& c, auto& v, auto& w, auto& k) {
             c.schemes.clear();
             for (const auto& s : split_list(v)) c.schemes.push_back(signals::parse_scheme(s));
             if (c.schemes.empty()) bad(w, k, "needs at least one scheme");
         })},
        {"snrs", guarded([](RunConfig& c, auto& v, auto& w, auto& k) {
             c.snrs_db.clear();
             for (const auto& s : split_list(v)) c.snrs_db.push_back(to_real(s, w, k));
         })},
        SIZE_KEY("frames_per_cell", frames_per_cell),
        SIZE_KEY("sps", sps),
        {"scenario", guarded([](RunConfig& c, auto& v, auto&, auto&) { c.scenario = signals::parse_scenario(v); })},
        REAL_KEY("train_snr_min", train_snr_min),
        REAL_KEY("train_snr_max", train_snr_max),
        REAL_KEY("test_snr_min", test_snr_min),
        REAL_KEY("test_snr_max", test_snr_max),
        SIZE_KEY("eval_episodes", eval_episodes),
        // outputs
        STR_KEY("checkpoint", checkpoint),
        STR_KEY("metrics", metrics),
        STR_KEY("confusion", confusion),
        SIZE_KEY("checkpoint_every", checkpoint_every),
        // diagnostics
        SIZE_KEY("gradcheck_instances", gradcheck_instances),
        REAL_KEY("gradcheck_tol", gradcheck_tol),
        SIZE_KEY("toy_steps", toy_steps),
        REAL_KEY("toy_lr", toy_lr),
        SIZE_KEY("bench_m", bench_m),
        SIZE_KEY("bench_depth", bench_depth),
    };
    return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef BOOL_KEY
#undef STR_KEY

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + ": unknown key '" + key + "'");
    it->second(cfg, value, where, key);
}

RunConfig parse_config(const std::string& text, const std::string& source, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": missing key before '='");
        apply_setting(base, key, value, where);
    }
    return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, std::move(base));
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
    double out = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end) throw FormatError(FormatError::Kind::Invalid, where + ": bad number '" + s + "'");
    return out;
}

std::string arch_to_text(const layers::ArchConfig& a) {
    std::ostringstream o;
    o << "n_classes=" << a.n_classes << '\n'
      << "frame_len=" << a.frame_len << '\n'
      << "conv_channels=" << a.conv_channels << '\n'
      << "attn_dim=" << a.attn_dim << '\n'
      << "n_heads=" << a.n_heads << '\n'
      << "softmax_lift=" << layers::lift_name(a.softmax_lift) << '\n'
      << "activation=" << ad::act_name(a.activation) << '\n'
      << "conv_kernel=" << a.conv_kernel << '\n'
      << "conv_stride=" << a.conv_stride << '\n'
      << "conv_blocks=" << a.conv_blocks << '\n'
      << "fc_blocks=" << a.fc_blocks << '\n'
      << "fc_hidden=" << a.fc_hidden << '\n'
      << "use_attention=" << (a.use_attention ? "true" : "false") << '\n'
      << "real_valued=" << (a.real_valued ? "true" : "false") << '\n'
      << "norm_eps=" << format_double(a.norm_eps) << '\n';
    return o.str();
}

layers::ArchConfig arch_from_text(const std::string& text) {
    static const char* kArchKeys[] = {"frame_len",   "conv_channels", "attn_dim",    "n_heads",     "softmax_lift",
                                      "activation",  "conv_kernel",   "conv_stride", "conv_blocks", "fc_blocks",
                                      "fc_hidden",   "use_attention", "real_valued", "norm_eps"};
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = "checkpoint arch:" + std::to_string(lineno);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "n_classes") {
            c.arch.n_classes = to_size(value, where, key);
            continue;
        }
        bool known = false;
        for (const char* k : kArchKeys) known = known || key == k;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
        apply_setting(c, key, value, where);
    }
    return c.arch;
}

}  // namespace camel::cli
