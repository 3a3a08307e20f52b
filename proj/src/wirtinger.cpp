#include "camel/wirtinger.hpp"

#include <cmath>

namespace camel {

CTensor complex_gradient(ad::Tape& tape, const ad::Var& loss, const ad::Var& param) {
    const ad::Var p[] = {param};
    return complex_gradient(tape, loss, std::span<const ad::Var>(p)).front();
}

std::vector<CTensor> complex_gradient(ad::Tape& tape, const ad::Var& loss, std::span<const ad::Var> params) {
    for (const auto& p : params) {
        if (!p.valid() || &p.tape() != &tape || p.id() >= static_cast<int>(tape.size())) {
            throw std::invalid_argument("complex_gradient: parameter is not on this tape");
        }
    }
    std::vector<CTensor> g = tape.grad_values(loss, params);
    for (auto& t : g) t = scale(t, 2.0);
    return g;
}

LossAndGrad complex_gradient(const LossFn& fn, const ParamSet& theta) {
    ad::Tape tape;
    const auto leaves = theta.to_leaves(tape);
    const ad::Var loss = fn(tape, leaves);
    LossAndGrad out;
    out.loss = loss.value().item().real();
    out.grad = theta.with_values(complex_gradient(tape, loss, leaves));
    return out;
}

double evaluate_loss(const LossFn& fn, const ParamSet& theta) {
    ad::Tape tape;
    ad::NoGradGuard guard(tape);
    const auto leaves = theta.to_leaves(tape, false);
    return fn(tape, leaves).value().item().real();
}

CrReport cr_measure(const TensorFn& fn, const CTensor& point, double tol, double h) {
    CrReport rep;
    CTensor x = point;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const cplx x0 = x[k];
        auto diff = [&](cplx step) {
            x[k] = x0 + step;
            CTensor fp = fn(x);
            x[k] = x0 - step;
            CTensor fm = fn(x);
            x[k] = x0;
            if (!fp.all_finite() || !fm.all_finite()) {
                throw std::domain_error("cr_check: function produced a non-finite value");
            }
            return scale(sub(fp, fm), 1.0 / (2.0 * h));
        };
        const CTensor d_re = diff(cplx(h, 0.0));  // dRe f/dRe x + j dIm f/dRe x
        const CTensor d_im = diff(cplx(0.0, h));  // dRe f/dIm x + j dIm f/dIm x
        for (std::size_t i = 0; i < d_re.size(); ++i) {
            // dRe/dRe = dIm/dIm and dRe/dIm = -dIm/dRe  <=>  d/dIm = j d/dRe
            const double v = std::abs(d_im[i] - cplx(0.0, 1.0) * d_re[i]);
            rep.max_violation = std::max(rep.max_violation, v);
        }
    }
    rep.analytic = rep.max_violation <= tol;
    return rep;
}

bool cr_check(const TensorFn& fn, const CTensor& point, double tol) { return cr_measure(fn, point, tol).analytic; }

HessianProbe::HessianProbe(const LossFn& fn, const ParamSet& theta) : theta_(theta) {
    leaves_ = theta_.to_leaves(tape_);
    const ad::Var loss = fn(tape_, leaves_);
    loss_ = loss.value().item().real();
    grad_vars_ = tape_.grad(loss, leaves_);
    std::vector<CTensor> g;
    for (auto& v : grad_vars_) {
        v = ad::scale(v, 2.0);
        g.push_back(v.value());
    }
    grad_ = theta_.with_values(std::move(g));
}

ParamSet HessianProbe::apply(const ParamSet& u) {
    theta_.require_same_layout(u, "HessianProbe::apply");
    ++applies_;
    const std::size_t mark = tape_.size();
    ad::Var s;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const ad::Var uk = tape_.constant(camel::conj(u.tensor(k)));
        const ad::Var term = ad::real(ad::sum_all(ad::mul(uk, grad_vars_[k])));
        s = s.valid() ? ad::add(s, term) : term;
    }
    std::vector<CTensor> out = complex_gradient(tape_, s, leaves_);
    tape_.truncate(mark);
    return theta_.with_values(std::move(out));
}

HvpResult hvp(const LossFn& fn, const ParamSet& theta, const ParamSet& v) {
    HessianProbe probe(fn, theta);
    const cplx j(0.0, 1.0);
    // apply(u) = J u + K conj(u)
    const ParamSet a1 = probe.apply(v);
    const ParamSet a2 = probe.apply(v.scaled(j));
    const ParamSet vc = v.conjugated();
    const ParamSet b1 = probe.apply(vc);
    const ParamSet b2 = probe.apply(vc.scaled(j));
    HvpResult r;
    r.h_tt_v = (a1 - a2.scaled(j)).scaled(0.5);
    r.h_ct_v = (b1 + b2.scaled(j)).scaled(0.5);
    return r;
}

ChainLayer chain_square() {
    return {"square", true, [](cplx z) { return z * z; }, [](cplx z) { return 2.0 * z; }};
}

ChainLayer chain_exp() {
    return {"exp", true, [](cplx z) { return std::exp(z); }, [](cplx z) { return std::exp(z); }};
}

ChainLayer chain_affine(cplx a, cplx b) {
    return {"affine", true, [a, b](cplx z) { return a * z + b; }, [a](cplx) { return a; }};
}

ChainLayer chain_conj() {
    return {"conj", false, [](cplx z) { return std::conj(z); }, [](cplx) { return cplx(0.0, 0.0); }};
}

std::vector<ChainLayer> make_analytic_chain(std::size_t depth) {
    std::vector<ChainLayer> chain;
    for (std::size_t i = 0; i <= depth; ++i) {
        switch (i % 3) {
            case 0: chain.push_back(chain_affine(cplx(0.8, 0.3), cplx(0.1, -0.2))); break;
            case 1: chain.push_back(chain_square()); break;
            default: chain.push_back(chain_exp()); break;
        }
    }
    return chain;
}

OpCount opcount_compare(const std::vector<ChainLayer>& chain, const std::vector<cplx>& points) {
    if (chain.empty()) throw std::invalid_argument("opcount_compare: empty chain");
    for (const auto& l : chain) {
        if (!l.analytic) throw std::invalid_argument("opcount_compare: layer '" + l.name + "' is not analytic");
    }
    OpCount oc;
    const std::size_t m = points.size();
    oc.deriv_cd.resize(m);
    oc.deriv_iq.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        // CD: one complex product per composition, dg/dz = dg/du du/dz.
        cplx u = points[k];
        cplx d = chain[0].derivative(u);
        u = chain[0].value(u);
        // IQ: 2x2 real Jacobian [[dRe/dRe, dIm/dRe], [dRe/dIm, dIm/dIm]] per element.
        double blk[2][2] = {{d.real(), d.imag()}, {-d.imag(), d.real()}};
        for (std::size_t l = 1; l < chain.size(); ++l) {
            const cplx g = chain[l].derivative(u);
            u = chain[l].value(u);
            const double gr = g.real(), gi = g.imag();
            d = cplx(gr * d.real() - gi * d.imag(), gr * d.imag() + gi * d.real());
            oc.count_cd += 4;
            const double outer[2][2] = {{gr, gi}, {-gi, gr}};
            double prod[2][2];
            // d(z->g) = d(z->u) * d(u->g) in this row layout.
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) prod[r][c] = blk[r][0] * outer[0][c] + blk[r][1] * outer[1][c];
            oc.count_iq += 8;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) blk[r][c] = prod[r][c];
        }
        oc.deriv_cd[k] = d;
        oc.deriv_iq[k] = cplx(blk[0][0], blk[0][1]);
    }
    return oc;
}

OpCount opcount_compare(const std::vector<ChainLayer>& chain, std::size_t m) {
    std::vector<cplx> pts(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double t = static_cast<double>(k + 1) / static_cast<double>(m + 1);
        pts[k] = cplx(0.3 * std::cos(6.0 * t), 0.3 * std::sin(6.0 * t));
    }
    return opcount_compare(chain, pts);
}

}  // namespace camel
