#include "camel/gradcheck.hpp"

#include <algorithm>
#include <memory>

#include "camel/fdiff.hpp"
#include "camel/layers.hpp"
#include "camel/wirtinger.hpp"

namespace camel::cli {

using ad::Tape;
using ad::Var;
namespace L = camel::layers;

namespace {

CTensor randn(Rng& rng, Shape s) {
    CTensor t(std::move(s));
    for (auto& z : t.data()) z = cplx(rng.normal(), rng.normal());
    return t;
}

/// Inputs with fixed shapes and standard complex normal entries.
std::function<std::vector<CTensor>(Rng&)> shapes(std::vector<Shape> ss) {
    return [ss](Rng& rng) {
        std::vector<CTensor> out;
        for (const auto& s : ss) out.push_back(randn(rng, s));
        return out;
    };
}

using Build = std::function<Var(Tape&, std::span<const Var>)>;

GradCase unary(std::string name, Shape s, std::function<Var(const Var&)> f) {
    return {std::move(name), shapes({std::move(s)}), [f](Tape&, std::span<const Var> v) { return f(v[0]); }};
}

GradCase binary(std::string name, Shape a, Shape b, std::function<Var(const Var&, const Var&)> f) {
    return {std::move(name), shapes({std::move(a), std::move(b)}),
            [f](Tape&, std::span<const Var> v) { return f(v[0], v[1]); }};
}

GradCase forward_case() {
    L::ArchConfig arch;
    arch.n_classes = 2;
    arch.frame_len = 16;
    arch.conv_channels = 3;
    arch.attn_dim = 4;
    arch.n_heads = 2;
    arch.fc_hidden = 3;
    auto net = std::make_shared<L::CamelNet>(arch);
    auto frames = std::make_shared<CTensor>();
    GradCase c;
    c.name = "camel_forward";
    c.inputs = [net, frames](Rng& rng) {
        std::vector<CTensor> out;
        for (const auto& e : net->init_params(rng)) out.push_back(e.second);
        *frames = randn(rng, {4, 1, 16});
        return out;
    };
    c.build = [net, frames](Tape&, std::span<const Var> v) {
        static const int labels[] = {0, 1, 1, 0};
        return L::cross_entropy(net->log_probs(v.front().tape(), v, *frames), labels);
    };
    return c;
}

}  // namespace

std::vector<GradCase> builtin_grad_cases() {
    std::vector<GradCase> c;
    // tape primitives
    c.push_back(binary("add", {2, 3}, {2, 3}, [](auto& a, auto& b) { return ad::add(a, b); }));
    c.push_back(binary("sub", {2, 3}, {2, 3}, [](auto& a, auto& b) { return ad::sub(a, b); }));
    c.push_back(binary("mul", {2, 3}, {2, 3}, [](auto& a, auto& b) { return ad::mul(a, b); }));
    c.push_back(unary("scale", {4}, [](auto& a) { return ad::scale(a, cplx(0.3, -1.2)); }));
    c.push_back(unary("add_scalar", {4}, [](auto& a) { return ad::add_scalar(a, cplx(0.5, 2.0)); }));
    c.push_back(binary("partmul", {5}, {5}, [](auto& a, auto& b) { return ad::partmul(a, b); }));
    c.push_back(unary("conj", {4}, [](auto& a) { return ad::conj(a); }));
    c.push_back(unary("real", {4}, [](auto& a) { return ad::real(a); }));
    c.push_back(unary("imag", {4}, [](auto& a) { return ad::imag(a); }));
    c.push_back(unary("abs", {4}, [](auto& a) { return ad::abs(a); }));
    c.push_back(unary("recip", {4}, [](auto& a) { return ad::recip(a); }));
    c.push_back(unary("exp", {4}, [](auto& a) { return ad::exp(a); }));
    c.push_back(unary("pow", {4}, [](auto& a) { return ad::pow(a, -0.5); }));
    c.push_back(binary("matmul", {3, 4}, {4, 2}, [](auto& a, auto& b) { return ad::matmul(a, b); }));
    c.push_back(binary("matmul_batched", {2, 3, 4}, {2, 4, 2}, [](auto& a, auto& b) { return ad::matmul(a, b); }));
    c.push_back(unary("transpose", {2, 3, 4}, [](auto& a) { return ad::transpose(a); }));
    c.push_back(unary("reshape", {2, 6}, [](auto& a) { return ad::reshape(a, {3, 4}); }));
    c.push_back(unary("reduce_axis", {2, 3, 4}, [](auto& a) { return ad::reduce_axis(a, 1); }));
    c.push_back(unary("expand_axis", {2, 3}, [](auto& a) { return ad::expand_axis(a, 1, 4); }));
    c.push_back(binary("conv1d", {2, 2, 9}, {3, 2, 3}, [](auto& x, auto& k) { return ad::conv1d(x, k, 2); }));
    c.push_back(binary("conv1d_back_input", {2, 3, 4}, {3, 2, 3},
                       [](auto& g, auto& k) { return ad::conv1d_back_input(g, k, 9, 2); }));
    c.push_back(binary("conv1d_back_weight", {2, 3, 4}, {2, 2, 9},
                       [](auto& g, auto& x) { return ad::conv1d_back_weight(g, x, 3, 2); }));
    c.push_back(unary("softmax_last", {3, 5}, [](auto& a) { return ad::softmax_last(a); }));
    c.push_back(unary("log_softmax_last", {3, 5}, [](auto& a) { return ad::log_softmax_last(a); }));
    for (auto k : {ad::ActKind::CRelu, ad::ActKind::CTanh, ad::ActKind::CSigmoid}) {
        for (int order = 0; order <= 1; ++order) {
            c.push_back(unary(std::string("act_") + ad::act_name(k) + (order ? "'" : ""), {6},
                              [k, order](auto& a) { return ad::act(a, k, order); }));
        }
    }
    c.push_back(unary("slice_last", {2, 6}, [](auto& a) { return ad::slice_last(a, 1, 3); }));
    c.push_back(unary("pad_last", {2, 3}, [](auto& a) { return ad::pad_last(a, 2, 7); }));

    // layers
    c.push_back({"cconv1d", shapes({{2, 2, 9}, {3, 2, 3}, {3}}),
                 [](Tape&, std::span<const Var> v) { return L::cconv1d(v[0], v[1], v[2], 2); }});
    c.push_back({"cfc", shapes({{3, 4}, {4, 2}, {2}}),
                 [](Tape&, std::span<const Var> v) { return L::cfc(v[0], v[1], v[2]); }});
    c.push_back({"cfc_vector", shapes({{4}, {4, 2}, {2}}),
                 [](Tape&, std::span<const Var> v) { return L::cfc(v[0], v[1], v[2]); }});
    for (auto lift : {L::Lift::Abs, L::Lift::Re, L::Lift::Im}) {
        c.push_back(unary(std::string("c_softmax_") + L::lift_name(lift), {3, 5},
                          [lift](auto& a) { return L::c_softmax(a, lift); }));
    }
    c.push_back({"c_attention", shapes({{3, 4}, {5, 4}, {5, 2}}),
                 [](Tape&, std::span<const Var> v) { return L::c_attention(v[0], v[1], v[2], L::Lift::Abs); }});
    c.push_back({"c_attention_batched", shapes({{2, 3, 4}, {2, 5, 4}, {2, 5, 2}}),
                 [](Tape&, std::span<const Var> v) { return L::c_attention(v[0], v[1], v[2], L::Lift::Re); }});
    c.push_back({"c_mha", shapes({{2, 3, 4}, {2, 5, 4}, {2, 5, 4}, {4, 2}, {4, 2}, {4, 2}, {4, 2}, {4, 2}, {4, 2}, {4, 4}}),
                 [](Tape&, std::span<const Var> v) {
                     L::MhaParams p;
                     p.wq = {v[3], v[6]};
                     p.wk = {v[4], v[7]};
                     p.wv = {v[5], v[8]};
                     p.wo = v[9];
                     return L::c_mha(v[0], v[1], v[2], p, L::Lift::Abs);
                 }});
    c.push_back({"c_norm", shapes({{4, 3, 5}, {3}, {3}}),
                 [](Tape&, std::span<const Var> v) { return L::c_norm(v[0], v[1], v[2]); }});
    c.push_back({"c_norm_2d", shapes({{5, 3}, {3}, {3}}),
                 [](Tape&, std::span<const Var> v) { return L::c_norm(v[0], v[1], v[2]); }});
    for (auto k : {ad::ActKind::CRelu, ad::ActKind::CTanh, ad::ActKind::CSigmoid}) {
        c.push_back(unary(std::string("c_act_") + ad::act_name(k), {2, 4}, [k](auto& a) { return L::c_act(a, k); }));
    }
    c.push_back(forward_case());
    return c;
}

std::vector<GradRow> run_gradcheck(const std::vector<GradCase>& cases, std::size_t instances, std::uint64_t seed,
                                   double tol, const std::string& corrupt) {
    std::vector<GradRow> rows;
    const Rng base(seed);
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const GradCase& gc = cases[ci];
        GradRow row;
        row.name = gc.name;
        Rng rng = base.split(ci);
        for (std::size_t inst = 0; inst < instances; ++inst) {
            const std::vector<CTensor> point = gc.inputs(rng);
            // Output shape first, to size the random contraction weight.
            CTensor weight;
            {
                Tape t;
                ad::NoGradGuard g(t);
                std::vector<Var> v;
                for (const auto& p : point) v.push_back(t.constant(p));
                weight = randn(rng, gc.build(t, v).shape());
            }
            auto loss = [&](Tape& t, std::span<const Var> v) {
                return ad::real(ad::sum_all(ad::mul(t.constant(weight), gc.build(t, v))));
            };
            std::vector<CTensor> analytic;
            {
                Tape t;
                std::vector<Var> v;
                for (const auto& p : point) v.push_back(t.leaf(p));
                analytic = complex_gradient(t, loss(t, v), v);
            }
            if (gc.name == corrupt) {
                for (auto& a : analytic) a = scale(a, 1.5);
            }
            const fd::RealFn f = [&](const std::vector<CTensor>& x) {
                Tape t;
                ad::NoGradGuard g(t);
                std::vector<Var> v;
                for (const auto& p : x) v.push_back(t.constant(p));
                return loss(t, v).value().item().real();
            };
            const double err = fd::rel_error(analytic, fd::complex_gradient(f, point));
            row.max_rel_error = std::max(row.max_rel_error, err);
            ++row.instances;
        }
        row.pass = row.max_rel_error <= tol;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace camel::cli
