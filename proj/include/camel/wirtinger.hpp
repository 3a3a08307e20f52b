#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "camel/ctensor.hpp"
#include "camel/paramset.hpp"
#include "camel/tape.hpp"

namespace camel {

/// Builds a real scalar loss on `tape` from parameter leaves (in ParamSet order).
using LossFn = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

/// Complex gradient vector 2 dL/d(param*) of a real scalar loss.
CTensor complex_gradient(ad::Tape& tape, const ad::Var& loss, const ad::Var& param);
std::vector<CTensor> complex_gradient(ad::Tape& tape, const ad::Var& loss, std::span<const ad::Var> params);

struct LossAndGrad {
    double loss = 0.0;
    ParamSet grad;
};

/// Evaluates `fn` at `theta` on a fresh tape and returns the loss with its complex gradient.
LossAndGrad complex_gradient(const LossFn& fn, const ParamSet& theta);
double evaluate_loss(const LossFn& fn, const ParamSet& theta);

// ---------------------------------------------------------------------------------------------
// Cauchy-Riemann analyticity check.

using TensorFn = std::function<CTensor(const CTensor&)>;

struct CrReport {
    /// max over (out, in) pairs of |df/dIm(x) - j df/dRe(x)|; zero for an analytic map.
    double max_violation = 0.0;
    bool analytic = false;
};

/// Estimates the four real Jacobian blocks of `fn` at `point` by central differences (step h)
/// and tests the Cauchy-Riemann equalities within `tol`.
CrReport cr_measure(const TensorFn& fn, const CTensor& point, double tol, double h = 1e-6);
bool cr_check(const TensorFn& fn, const CTensor& point, double tol);

// ---------------------------------------------------------------------------------------------
// Second-order products via double backprop.

/// Records L(theta) and its gradient map g(theta) = 2 dL/d(theta*) on one tape, then answers
/// repeated vector-Hessian queries by differentiating that recorded gradient again.
///
/// With J = dg/d(theta) and K = dg/d(theta*), apply(u) returns the complex gradient of
/// Re<u, g(theta)>, which equals J u + K conj(u). J is Hermitian and K symmetric for real L.
class HessianProbe {
public:
    HessianProbe(const LossFn& fn, const ParamSet& theta);
    HessianProbe(const HessianProbe&) = delete;
    HessianProbe& operator=(const HessianProbe&) = delete;

    double loss() const noexcept { return loss_; }
    const ParamSet& gradient() const noexcept { return grad_; }

    ParamSet apply(const ParamSet& u);
    std::size_t apply_count() const noexcept { return applies_; }

private:
    ad::Tape tape_;
    ParamSet theta_;
    std::vector<ad::Var> leaves_;
    std::vector<ad::Var> grad_vars_;
    ParamSet grad_;
    double loss_ = 0.0;
    std::size_t applies_ = 0;
};

struct HvpResult {
    /// H_{theta theta} v
    ParamSet h_tt_v;
    /// H_{theta* theta} v
    ParamSet h_ct_v;
};

/// Hessian-vector products of a real loss, with
///   H_{theta theta}  = (d grad_theta L / d theta)^*      = dg/d(theta)   (Hermitian)
///   H_{theta* theta} = (d grad_{theta*} L / d theta)^*   = dg/d(theta*)  (symmetric)
/// in denominator layout, grad_{theta*} L = conj(grad_theta L).
HvpResult hvp(const LossFn& fn, const ParamSet& theta, const ParamSet& v);

// ---------------------------------------------------------------------------------------------
// Derivative cost of an elementwise chain: complex-derivative (CD) vs stacked real/imag (IQ).

struct ChainLayer {
    std::string name;
    bool analytic = true;
    std::function<cplx(cplx)> value;
    /// Complex derivative; meaningful only when analytic.
    std::function<cplx(cplx)> derivative;
};

ChainLayer chain_square();
ChainLayer chain_exp();
ChainLayer chain_affine(cplx a, cplx b);
ChainLayer chain_conj();

/// Analytic chain with `depth` chain-rule compositions (depth + 1 layers).
std::vector<ChainLayer> make_analytic_chain(std::size_t depth);

struct OpCount {
    std::size_t count_cd = 0;
    std::size_t count_iq = 0;
    std::vector<cplx> deriv_cd;
    std::vector<cplx> deriv_iq;
    double ratio() const { return count_cd ? static_cast<double>(count_iq) / static_cast<double>(count_cd) : 0.0; }
};

/// Differentiates the elementwise chain at `points` both ways, counting real multiplications
/// spent composing the per-layer derivatives. Throws std::invalid_argument on a non-analytic layer.
OpCount opcount_compare(const std::vector<ChainLayer>& chain, const std::vector<cplx>& points);
/// Same, at m deterministic points.
OpCount opcount_compare(const std::vector<ChainLayer>& chain, std::size_t m);

}  // namespace camel
