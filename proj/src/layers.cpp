#include "camel/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace camel::layers {

const char* lift_name(Lift l) {
    switch (l) {
        case Lift::Abs: return "abs";
        case Lift::Re: return "re";
        case Lift::Im: return "im";
    }
    return "?";
}

Lift parse_lift(const std::string& s) {
    if (s == "abs") return Lift::Abs;
    if (s == "re") return Lift::Re;
    if (s == "im") return Lift::Im;
    throw std::invalid_argument("unknown softmax lift '" + s + "' (expected abs, re or im)");
}

Var lift(const Var& x, Lift kind) {
    switch (kind) {
        case Lift::Abs: return ad::abs(x);
        case Lift::Re: return ad::real(x);
        case Lift::Im: return ad::imag(x);
    }
    throw std::logic_error("lift: bad kind");
}

namespace {

/// Broadcast a per-channel vector (C) to `shape`, whose axis 1 is the channel axis.
Var broadcast_channel(const Var& v, const Shape& shape) {
    Var out = ad::expand_axis(v, 0, shape[0]);
    for (std::size_t ax = 2; ax < shape.size(); ++ax) out = ad::expand_axis(out, ax, shape[ax]);
    return out;
}

/// Sum over every axis but 1.
Var sum_to_channel(const Var& x) {
    Var out = x;
    for (std::size_t ax = x.value().rank(); ax-- > 2;) out = ad::reduce_axis(out, ax);
    return ad::reduce_axis(out, 0);
}

void require_vector(const Var& v, std::size_t n, const char* what) {
    if (v.value().rank() != 1 || v.value().dim(0) != n) {
        throw ShapeError(std::string(what) + ": expected shape [" + std::to_string(n) + "], got " +
                         shape_str(v.shape()));
    }
}

}  // namespace

Var cconv1d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride) {
    const Var y = ad::conv1d(x, kernel, stride);
    require_vector(bias, kernel.value().dim(0), "cconv1d bias");
    return ad::add(y, broadcast_channel(bias, y.shape()));
}

Var linear_last(const Var& x, const Var& w) {
    const Shape& xs = x.shape();
    if (w.value().rank() != 2 || xs.empty() || xs.back() != w.value().dim(0)) {
        throw ShapeError("linear: input " + shape_str(xs) + " does not match weight " + shape_str(w.shape()));
    }
    if (xs.size() == 2) return ad::matmul(x, w);
    const std::size_t din = xs.back();
    const Var flat = ad::reshape(x, Shape{x.value().size() / din, din});
    Shape os = xs;
    os.back() = w.value().dim(1);
    return ad::reshape(ad::matmul(flat, w), std::move(os));
}

Var cfc(const Var& x, const Var& weight, const Var& bias) {
    const CTensor& w = weight.value();
    if (w.rank() != 2) throw ShapeError("cfc: weight must be rank 2, got " + shape_str(w.shape()));
    require_vector(bias, w.dim(1), "cfc bias");
    if (x.value().rank() == 1) {
        if (x.value().dim(0) != w.dim(0)) {
            throw ShapeError("cfc: input " + shape_str(x.shape()) + " does not match weight " + shape_str(w.shape()));
        }
        const Var y = ad::matmul(ad::reshape(x, Shape{1, w.dim(0)}), weight);
        return ad::add(ad::reshape(y, Shape{w.dim(1)}), bias);
    }
    if (x.value().rank() != 2) throw ShapeError("cfc: input must be rank 1 or 2, got " + shape_str(x.shape()));
    const Var y = linear_last(x, weight);
    return ad::add(y, broadcast_channel(bias, y.shape()));
}

Var c_softmax(const Var& x, Lift kind) {
    if (x.value().rank() == 0 || x.value().size() == 0) throw ShapeError("c_softmax: empty input");
    return ad::softmax_last(lift(x, kind));
}

Var c_attention(const Var& q, const Var& k, const Var& v, Lift kind) {
    const std::size_t r = q.value().rank();
    if ((r != 2 && r != 3) || k.value().rank() != r || v.value().rank() != r) {
        throw ShapeError("c_attention: Q, K, V must share rank 2 or 3, got " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
    }
    const std::size_t d = k.shape().back();
    if (q.shape().back() != d) {
        throw ShapeError("c_attention: Q " + shape_str(q.shape()) + " and K " + shape_str(k.shape()) +
                         " feature sizes differ");
    }
    if (k.shape()[r - 2] != v.shape()[r - 2]) {
        throw ShapeError("c_attention: K " + shape_str(k.shape()) + " and V " + shape_str(v.shape()) +
                         " lengths differ");
    }
    const Var logits = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    return ad::matmul(c_softmax(logits, kind), v);
}

Var c_mha(const Var& q, const Var& k, const Var& v, const MhaParams& p, Lift kind) {
    const std::size_t n = p.wq.size();
    if (n == 0 || p.wk.size() != n || p.wv.size() != n) throw ShapeError("c_mha: need one Wq/Wk/Wv per head");
    std::vector<Var> heads;
    heads.reserve(n);
    for (std::size_t h = 0; h < n; ++h) {
        heads.push_back(c_attention(linear_last(q, p.wq[h]), linear_last(k, p.wk[h]), linear_last(v, p.wv[h]), kind));
    }
    const Var cat = n == 1 ? heads.front() : ad::concat_last(heads);
    return linear_last(cat, p.wo);
}

NormState NormState::identity(std::size_t channels) {
    NormState s;
    s.mean = CTensor(Shape{channels});
    s.var.assign(channels, 1.0);
    return s;
}

Var c_norm(const Var& x, const Var& gamma, const Var& kappa, double eps, NormState* running, bool training) {
    if (!(eps >= 0.0)) throw std::invalid_argument("c_norm: eps must be non-negative, got " + std::to_string(eps));
    const Shape& s = x.shape();
    if (s.size() < 2) throw ShapeError("c_norm: input must be (N, C, ...), got " + shape_str(s));
    const std::size_t C = s[1];
    require_vector(gamma, C, "c_norm gamma");
    require_vector(kappa, C, "c_norm kappa");
    const std::size_t count = x.value().size() / C;
    ad::Tape& tape = x.tape();

    Var centered, inv_std;
    if (training) {
        if (count < 2) throw ShapeError("c_norm: training mode needs at least 2 samples per channel");
        const double invn = 1.0 / static_cast<double>(count);
        const Var mean = ad::scale(sum_to_channel(x), invn);
        centered = ad::sub(x, broadcast_channel(mean, s));
        const Var var = ad::scale(sum_to_channel(ad::mul(centered, ad::conj(centered))), invn);
        inv_std = ad::pow(ad::add_scalar(ad::real(var), eps), -0.5);
        if (running) {
            if (running->mean.size() != C) *running = NormState::identity(C);
            const double m = running->momentum;
            for (std::size_t c = 0; c < C; ++c) {
                running->mean[c] = (1.0 - m) * running->mean[c] + m * mean.value()[c];
                running->var[c] = (1.0 - m) * running->var[c] + m * var.value()[c].real();
            }
        }
    } else {
        if (!running || running->mean.size() != C) throw std::invalid_argument("c_norm: inference mode needs running stats");
        centered = ad::sub(x, broadcast_channel(tape.constant(running->mean), s));
        CTensor inv(Shape{C});
        for (std::size_t c = 0; c < C; ++c) inv[c] = 1.0 / std::sqrt(running->var[c] + eps);
        inv_std = tape.constant(std::move(inv));
    }
    const Var scaled = ad::mul(centered, broadcast_channel(ad::mul(inv_std, gamma), s));
    return ad::add(scaled, broadcast_channel(kappa, s));
}

Var c_act(const Var& x, ad::ActKind kind) { return ad::act(x, kind, 0); }

Var mean_axis(const Var& x, std::size_t axis) {
    const double n = static_cast<double>(x.shape().at(axis));
    return ad::scale(ad::reduce_axis(x, axis), 1.0 / n);
}

// ---------------------------------------------------------------------------------------------

std::size_t ArchConfig::seq_len() const {
    std::size_t len = frame_len;
    for (std::size_t b = 0; b < conv_blocks; ++b) len = (len - conv_kernel) / conv_stride + 1;
    return len;
}

void ArchConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw std::invalid_argument(std::string("ArchConfig: ") + name + " must be positive");
    };
    positive(n_classes, "n_classes");
    positive(frame_len, "frame_len");
    positive(conv_channels, "conv_channels");
    positive(attn_dim, "attn_dim");
    positive(n_heads, "n_heads");
    positive(conv_kernel, "conv_kernel");
    positive(conv_stride, "conv_stride");
    positive(conv_blocks, "conv_blocks");
    positive(fc_blocks, "fc_blocks");
    positive(fc_hidden, "fc_hidden");
    if (attn_dim % n_heads != 0) {
        throw std::invalid_argument("ArchConfig: attn_dim " + std::to_string(attn_dim) +
                                    " is not divisible by n_heads " + std::to_string(n_heads));
    }
    std::size_t len = frame_len;
    for (std::size_t b = 0; b < conv_blocks; ++b) {
        if (len < conv_kernel) throw std::invalid_argument("ArchConfig: frame too short for the convolution blocks");
        len = (len - conv_kernel) / conv_stride + 1;
    }
}

CamelNet::CamelNet(ArchConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

namespace {

struct Layout {
    std::string name;
    Shape shape;
    std::size_t fan_in = 0;  // 0: not a weight
    cplx fill = 0.0;
};

std::vector<Layout> layout_of(const ArchConfig& c) {
    std::vector<Layout> L;
    const std::size_t C = c.conv_channels;
    L.push_back({"embed.A", {C, c.in_channels(), 1}, c.in_channels()});
    L.push_back({"embed.b", {C}});
    for (std::size_t b = 0; b < c.conv_blocks; ++b) {
        const std::string p = "conv" + std::to_string(b) + ".";
        L.push_back({p + "A", {C, C, c.conv_kernel}, C * c.conv_kernel});
        L.push_back({p + "b", {C}});
        L.push_back({p + "gamma", {C}, 0, 1.0});
        L.push_back({p + "kappa", {C}});
    }
    std::size_t feat = C;
    if (c.use_attention) {
        const std::size_t dh = c.attn_dim / c.n_heads;
        for (std::size_t h = 0; h < c.n_heads; ++h) {
            const std::string s = std::to_string(h);
            L.push_back({"attn.wq" + s, {C, dh}, C});
            L.push_back({"attn.wk" + s, {C, dh}, C});
            L.push_back({"attn.wv" + s, {C, dh}, C});
        }
        L.push_back({"attn.wo", {c.attn_dim, c.attn_dim}, c.attn_dim});
        feat = c.attn_dim;
    }
    for (std::size_t b = 0; b < c.fc_blocks; ++b) {
        const std::string p = "fc" + std::to_string(b) + ".";
        L.push_back({p + "W", {feat, c.fc_hidden}, feat});
        L.push_back({p + "b", {c.fc_hidden}});
        L.push_back({p + "gamma", {c.fc_hidden}, 0, 1.0});
        L.push_back({p + "kappa", {c.fc_hidden}});
        feat = c.fc_hidden;
    }
    L.push_back({"out.W", {feat, c.n_classes}, feat});
    L.push_back({"out.b", {c.n_classes}});
    return L;
}

}  // namespace

ParamSet CamelNet::init_params(Rng& rng) const {
    ParamSet p;
    for (const auto& l : layout_of(cfg_)) {
        CTensor t(l.shape, l.fill);
        if (l.fan_in) {
            // uniform(-a, a) has variance a^2/3; each part gets variance 1/(2 fan_in), so E|w|^2 = 1/fan_in.
            const double a = std::sqrt(3.0 / (2.0 * static_cast<double>(l.fan_in)));
            for (auto& z : t.data()) {
                const double re = rng.uniform(-a, a);
                const double im = rng.uniform(-a, a);
                z = cfg_.real_valued ? cplx(re * std::sqrt(2.0), 0.0) : cplx(re, im);
            }
        }
        p.add(l.name, std::move(t));
    }
    return p;
}

ParamSet CamelNet::zero_params() const {
    ParamSet p;
    for (const auto& l : layout_of(cfg_)) p.add(l.name, CTensor(l.shape));
    return p;
}

CTensor CamelNet::prepare_input(const CTensor& frames) const {
    if (frames.rank() != 3 || frames.dim(1) != 1 || frames.dim(2) != cfg_.frame_len) {
        throw ShapeError("CamelNet: frames must be (N, 1, " + std::to_string(cfg_.frame_len) + "), got " +
                         shape_str(frames.shape()));
    }
    if (!cfg_.real_valued) return frames;
    const std::size_t N = frames.dim(0), L = frames.dim(2);
    CTensor x({N, 2, L});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < L; ++t) {
            x[(n * 2 + 0) * L + t] = frames[n * L + t].real();
            x[(n * 2 + 1) * L + t] = frames[n * L + t].imag();
        }
    return x;
}

Var CamelNet::log_probs(ad::Tape& tape, std::span<const Var> params, const CTensor& frames) const {
    const auto layout = layout_of(cfg_);
    if (params.size() != layout.size()) {
        throw ShapeError("CamelNet: expected " + std::to_string(layout.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    std::size_t i = 0;
    auto next = [&]() -> const Var& { return params[i++]; };

    Var h = tape.constant(prepare_input(frames));
    {
        const Var& A = next();
        const Var& b = next();
        h = cconv1d(h, A, b, 1);
    }
    for (std::size_t blk = 0; blk < cfg_.conv_blocks; ++blk) {
        const Var& A = next();
        const Var& b = next();
        const Var& g = next();
        const Var& k = next();
        h = c_act(c_norm(cconv1d(h, A, b, cfg_.conv_stride), g, k, cfg_.norm_eps), cfg_.activation);
    }
    Var feat;
    if (cfg_.use_attention) {
        MhaParams mp;
        for (std::size_t hd = 0; hd < cfg_.n_heads; ++hd) {
            mp.wq.push_back(next());
            mp.wk.push_back(next());
            mp.wv.push_back(next());
        }
        mp.wo = next();
        const Var seq = ad::transpose(h);  // (N, L', C): attend over time
        feat = mean_axis(c_mha(seq, seq, seq, mp, cfg_.softmax_lift), 1);
    } else {
        feat = mean_axis(h, 2);
    }
    for (std::size_t blk = 0; blk < cfg_.fc_blocks; ++blk) {
        const Var& W = next();
        const Var& b = next();
        const Var& g = next();
        const Var& k = next();
        feat = c_act(c_norm(cfc(feat, W, b), g, k, cfg_.norm_eps), cfg_.activation);
    }
    const Var& W = next();
    const Var& b = next();
    const Var logits = cfc(feat, W, b);
    return ad::log_softmax_last(lift(logits, cfg_.softmax_lift));
}

CTensor camel_forward(const CTensor& frames, const ParamSet& theta, const ArchConfig& cfg) {
    const CamelNet net(cfg);
    ad::Tape tape;
    ad::NoGradGuard guard(tape);
    const auto leaves = theta.to_leaves(tape, false);
    return net.log_probs(tape, leaves, frames).value();
}

Var cross_entropy(const Var& log_probs, std::span<const int> labels) {
    const CTensor& lp = log_probs.value();
    if (lp.rank() != 2 || lp.dim(0) != labels.size()) {
        throw ShapeError("cross_entropy: log-probs " + shape_str(lp.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
    }
    const std::size_t N = lp.dim(0), C = lp.dim(1);
    CTensor onehot({N, C});
    for (std::size_t n = 0; n < N; ++n) {
        if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= C) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(labels[n]) + " out of range");
        }
        onehot[n * C + static_cast<std::size_t>(labels[n])] = 1.0;
    }
    const Var picked = ad::sum_all(ad::mul(log_probs, log_probs.tape().constant(std::move(onehot))));
    return ad::real(ad::scale(picked, -1.0 / static_cast<double>(N)));
}

std::vector<int> argmax_rows(const CTensor& t) {
    if (t.rank() != 2) throw ShapeError("argmax_rows: expected rank 2, got " + shape_str(t.shape()));
    std::vector<int> out(t.dim(0));
    const std::size_t C = t.dim(1);
    for (std::size_t n = 0; n < t.dim(0); ++n) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (t[n * C + c].real() > t[n * C + best].real()) best = c;
        out[n] = static_cast<int>(best);
    }
    return out;
}

}  // namespace camel::layers
