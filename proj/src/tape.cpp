#include "camel/tape.hpp"

#include <cmath>

namespace camel::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Scale: return "scale";
        case Op::AddScalar: return "add_scalar";
        case Op::Mul: return "mul";
        case Op::PartMul: return "partmul";
        case Op::Conj: return "conj";
        case Op::Real: return "real";
        case Op::Imag: return "imag";
        case Op::Abs: return "abs";
        case Op::Recip: return "recip";
        case Op::Exp: return "exp";
        case Op::Pow: return "pow";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Reshape: return "reshape";
        case Op::ReduceAxis: return "reduce_axis";
        case Op::ExpandAxis: return "expand_axis";
        case Op::Conv1d: return "conv1d";
        case Op::Conv1dBackInput: return "conv1d_back_input";
        case Op::Conv1dBackWeight: return "conv1d_back_weight";
        case Op::Softmax: return "softmax";
        case Op::LogSoftmax: return "log_softmax";
        case Op::Act: return "act";
        case Op::SliceLast: return "slice_last";
        case Op::PadLast: return "pad_last";
    }
    return "?";
}

Tape& Var::tape() const {
    if (!tape_) throw std::logic_error("Var: not bound to a tape");
    return *tape_;
}

const CTensor& Var::value() const { return tape().node(id_).value; }

bool Var::requires_grad() const { return tape().node(id_).requires_grad; }

Var Tape::leaf(CTensor value, bool requires_grad) {
    nodes_.push_back(TapeNode{Op::Leaf, {}, std::move(value), requires_grad, {}});
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Op op, std::span<const Var> inputs, CTensor value, VjpFn vjp) {
    TapeNode n;
    n.op = op;
    n.value = std::move(value);
    n.inputs.reserve(inputs.size());
    bool any = false;
    for (const auto& v : inputs) {
        if (&v.tape() != this) throw std::logic_error(std::string(op_name(op)) + ": input lives on another tape");
        if (v.id() >= static_cast<int>(nodes_.size())) throw std::logic_error("record: input not on tape");
        n.inputs.push_back(v.id());
        any = any || nodes_[v.id()].requires_grad;
    }
    n.requires_grad = grad_enabled_ && any;
    if (n.requires_grad) n.vjp = std::move(vjp);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

const TapeNode& Tape::node(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::out_of_range("Tape: node " + std::to_string(id) + " not on tape");
    }
    return nodes_[id];
}

void Tape::truncate(std::size_t n) {
    while (nodes_.size() > n) nodes_.pop_back();
}

void Tape::check_loss(const Var& loss) const {
    const CTensor& v = node(loss.id()).value;
    if (v.size() != 1) throw LossError("backward: loss must be a scalar, got shape " + shape_str(v.shape()));
    if (!std::isfinite(v[0].real()) || !std::isfinite(v[0].imag())) throw NonFiniteLoss("backward: loss is not finite");
    if (std::abs(v[0].imag()) > kRealLossTol) {
        throw LossError("backward: loss must be real-valued, imaginary part is " + std::to_string(v[0].imag()));
    }
}

namespace {

// A real loss L seen as a complex node z = L has dL/dz = dL/dz* = 1/2 (L = Re z).
constexpr cplx kLossSeed{0.5, 0.0};

}  // namespace

std::vector<Var> Tape::sweep(const Var& loss, std::size_t end) {
    std::vector<Var> cot(end);
    cot[loss.id()] = constant(CTensor(node(loss.id()).value.shape(), kLossSeed));
    for (int id = loss.id(); id >= 0; --id) {
        if (!cot[id].valid()) continue;
        const TapeNode& n = nodes_[id];
        if (!n.requires_grad || !n.vjp) continue;
        const std::vector<int> inputs = n.inputs;
        const std::vector<Var> contrib = n.vjp(Var(this, id), cot[id]);
        for (std::size_t k = 0; k < contrib.size(); ++k) {
            if (!contrib[k].valid()) continue;
            const int in = inputs[k];
            if (!nodes_[in].requires_grad) continue;
            cot[in] = cot[in].valid() ? add(cot[in], contrib[k]) : contrib[k];
        }
    }
    return cot;
}

std::vector<Var> Tape::grad(const Var& loss, std::span<const Var> wrt) {
    check_loss(loss);
    const std::size_t end = nodes_.size();
    std::vector<Var> cot = sweep(loss, end);
    ++recorded_backwards_;
    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        if (w.id() < static_cast<int>(end) && cot[w.id()].valid()) {
            out.push_back(cot[w.id()]);
        } else {
            out.push_back(constant(CTensor(w.shape())));
        }
    }
    return out;
}

std::vector<CTensor> Tape::grad_values(const Var& loss, std::span<const Var> wrt) {
    check_loss(loss);
    NoGradGuard guard(*this);
    const std::size_t end = nodes_.size();
    std::vector<Var> cot = sweep(loss, end);
    std::vector<CTensor> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        if (w.id() < static_cast<int>(end) && cot[w.id()].valid()) {
            out.push_back(cot[w.id()].value());
        } else {
            out.emplace_back(w.shape());
        }
    }
    truncate(end);
    return out;
}

namespace {

CTensor times_j(const CTensor& t) { return camel::scale(t, cplx(0.0, 1.0)); }

}  // namespace

Sensitivities Tape::sensitivities(int id, const CTensor& cot) {
    NoGradGuard guard(*this);
    const std::size_t end = nodes_.size();
    const TapeNode& n = node(id);
    Sensitivities s;
    if (!n.vjp) return s;
    require_same_shape(n.value, cot, "sensitivities");
    // R(c) = P(c) + Q(c) with P complex-linear and Q conjugate-linear; recover both from R(c), R(jc).
    const auto r1 = n.vjp(Var(this, id), constant(cot));
    const auto r2 = n.vjp(Var(this, id), constant(times_j(cot)));
    for (std::size_t k = 0; k < r1.size(); ++k) {
        const Shape& in_shape = node(n.inputs[k]).value.shape();
        CTensor a = r1[k].valid() ? r1[k].value() : CTensor(in_shape);
        CTensor b = r2[k].valid() ? times_j(r2[k].value()) : CTensor(in_shape);
        s.direct.push_back(camel::scale(camel::sub(a, b), 0.5));
        s.conj_path.push_back(camel::scale(camel::add(a, b), 0.5));
    }
    truncate(end);
    return s;
}

std::map<int, DualCotangent> Tape::backward_dual(const Var& loss) {
    check_loss(loss);
    NoGradGuard guard(*this);
    const std::size_t end = nodes_.size();
    std::map<int, DualCotangent> cot;
    const Shape& ls = node(loss.id()).value.shape();
    cot[loss.id()] = DualCotangent{CTensor(ls, kLossSeed), CTensor(ls, kLossSeed)};

    auto accumulate = [&](int in, CTensor a, CTensor b) {
        auto it = cot.find(in);
        if (it == cot.end()) {
            cot.emplace(in, DualCotangent{std::move(a), std::move(b)});
        } else {
            it->second.wrt_value = camel::add(it->second.wrt_value, a);
            it->second.wrt_conj = camel::add(it->second.wrt_conj, b);
        }
    };

    for (int id = loss.id(); id >= 0; --id) {
        auto it = cot.find(id);
        if (it == cot.end()) continue;
        const TapeNode& n = nodes_[id];
        if (!n.requires_grad || !n.vjp) continue;
        const CTensor a_out = it->second.wrt_value;
        const CTensor b_out = it->second.wrt_conj;
        // Eq. form of the complex chain rule, per channel:
        //   dL/d in*  = (du/d in)^H dL/du*      + (du/d in*)^T dL/du
        //   dL/d in   = conj((du/d in)^H conj(dL/du) + (du/d in*)^T conj(dL/du*))
        const Sensitivities sb = sensitivities(id, b_out);           // P(b), Q(b)
        const Sensitivities sa = sensitivities(id, camel::conj(a_out));  // P(conj a), Q(conj a)
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (k >= sb.direct.size()) break;
            const int in = n.inputs[k];
            if (!nodes_[in].requires_grad) continue;
            // Q(x) = (du/d in*)^T conj(x), so (du/d in*)^T y = Q(conj y).
            CTensor wrt_conj = camel::add(sb.direct[k], sa.conj_path[k]);
            CTensor wrt_value = camel::conj(camel::add(sa.direct[k], sb.conj_path[k]));
            accumulate(in, std::move(wrt_value), std::move(wrt_conj));
        }
        truncate(end);
    }
    return cot;
}

}  // namespace camel::ad
