#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "camel/ctensor.hpp"

namespace camel::ad {

/// Primitive operations the tape knows how to differentiate.
enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Scale,
    AddScalar,
    Mul,
    PartMul,
    Conj,
    Real,
    Imag,
    Abs,
    Recip,
    Exp,
    Pow,
    MatMul,
    Transpose,
    Reshape,
    ReduceAxis,
    ExpandAxis,
    Conv1d,
    Conv1dBackInput,
    Conv1dBackWeight,
    Softmax,
    LogSoftmax,
    Act,
    SliceLast,
    PadLast,
};

const char* op_name(Op op);

/// Loss handed to backward is not a real scalar.
class LossError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Loss handed to backward is NaN or infinite, usually a sign of divergence upstream.
class NonFiniteLoss : public LossError {
public:
    using LossError::LossError;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape holds the node.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const noexcept { return tape_ != nullptr && id_ >= 0; }
    Tape& tape() const;
    int id() const noexcept { return id_; }
    const CTensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Conjugate-channel vector-Jacobian rule of a node.
///
/// Given the cotangent c = dL/d(out*) of a real loss L, returns dL/d(in*) contributions, one
/// per input (an invalid Var means "no contribution"). The rule is real-linear in c:
///   c_in = (d out/d in)^H c + (d out/d in*)^T conj(c).
/// Rules are written with tape operations, so the backward pass can itself be recorded and
/// differentiated again.
using VjpFn = std::function<std::vector<Var>(const Var& out, const Var& cot)>;

struct TapeNode {
    Op op = Op::Leaf;
    std::vector<int> inputs;
    CTensor value;
    bool requires_grad = false;
    VjpFn vjp;
};

/// Pair of Wirtinger cotangents (dL/dz, dL/dz*) at one node.
struct DualCotangent {
    CTensor wrt_value;
    CTensor wrt_conj;
};

/// The two partial sensitivities of a node, evaluated against one cotangent.
/// `direct` is (d out/d in)^H c; `conj_path` is (d out/d in*)^T conj(c). For analytic
/// primitives the conjugate path is identically zero.
struct Sensitivities {
    std::vector<CTensor> direct;
    std::vector<CTensor> conj_path;
};

/// Reverse-mode tape over complex tensors.
///
/// Nodes are appended in evaluation order, so ids are a topological order. The tape is
/// not thread-safe; use one tape per thread of work.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(CTensor value, bool requires_grad = true);
    Var constant(CTensor value) { return leaf(std::move(value), false); }

    Var record(Op op, std::span<const Var> inputs, CTensor value, VjpFn vjp);

    const TapeNode& node(int id) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    /// Drop every node with id >= n.
    void truncate(std::size_t n);

    bool grad_enabled() const noexcept { return grad_enabled_; }
    void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }

    /// Conjugate-channel cotangents dL/d(w*) for each w in wrt, recorded on this tape so the
    /// result can be differentiated again (double backprop). Zero tensors for unreachable w.
    std::vector<Var> grad(const Var& loss, std::span<const Var> wrt);

    /// Same as grad() but evaluated without recording; the tape is left as it was.
    std::vector<CTensor> grad_values(const Var& loss, std::span<const Var> wrt);

    /// Literal dual-channel sweep: propagates (dL/dz, dL/dz*) independently through every
    /// node using both partial sensitivities. Returns every node that received a cotangent.
    std::map<int, DualCotangent> backward_dual(const Var& loss);

    /// Splits node `id`'s rule into its two sensitivities applied to `cot`.
    Sensitivities sensitivities(int id, const CTensor& cot);

    /// Number of backward sweeps that were recorded for re-differentiation.
    std::size_t recorded_backward_count() const noexcept { return recorded_backwards_; }

    static constexpr double kRealLossTol = 1e-12;

private:
    void check_loss(const Var& loss) const;
    std::vector<Var> sweep(const Var& loss, std::size_t end);

    std::deque<TapeNode> nodes_;
    bool grad_enabled_ = true;
    std::size_t recorded_backwards_ = 0;
};

/// Disables recording of differentiable nodes for its lifetime.
class NoGradGuard {
public:
    explicit NoGradGuard(Tape& t) : tape_(t), prev_(t.grad_enabled()) { tape_.set_grad_enabled(false); }
    ~NoGradGuard() { tape_.set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    Tape& tape_;
    bool prev_;
};

// ---------------------------------------------------------------------------------------------
// Primitives. Every function validates shapes (ShapeError) and records one node.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, cplx s);
Var add_scalar(const Var& a, cplx s);
/// Re(a)Re(b) + j Im(a)Im(b), the part-wise product.
Var partmul(const Var& a, const Var& b);
Var conj(const Var& a);
Var real(const Var& a);
Var imag(const Var& a);
Var abs(const Var& a);
/// 1/z elementwise, with 1/0 defined as 0.
Var recip(const Var& a);
Var exp(const Var& a);
/// Principal power z^p elementwise.
Var pow(const Var& a, double p);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
/// Sum over one axis, removing it.
Var reduce_axis(const Var& a, std::size_t axis);
/// Insert a new axis of extent n at `axis` and replicate along it.
Var expand_axis(const Var& a, std::size_t axis, std::size_t n);

/// Valid 1-D convolution (cross-correlation).
///   x: (N, Cin, L), kernel: (Cout, Cin, K) -> (N, Cout, (L-K)/stride + 1)
///   out[n,o,t] = sum_{i,k} kernel[o,i,k] x[n,i,t*stride+k]
Var conv1d(const Var& x, const Var& kernel, std::size_t stride = 1);
Var conv1d_back_input(const Var& g, const Var& kernel, std::size_t length, std::size_t stride);
Var conv1d_back_weight(const Var& g, const Var& x, std::size_t ksize, std::size_t stride);

/// Real softmax over the last axis of Re(a). Output has zero imaginary part.
Var softmax_last(const Var& a);
/// Real log-softmax over the last axis of Re(a).
Var log_softmax_last(const Var& a);

enum class ActKind : std::uint8_t { CRelu, CTanh, CSigmoid };
const char* act_name(ActKind k);
ActKind parse_act(const std::string& s);

/// f^(order)(Re a) + j f^(order)(Im a). order 0 is the activation itself.
Var act(const Var& a, ActKind kind, int order = 0);

Var slice_last(const Var& a, std::size_t begin, std::size_t len);
Var pad_last(const Var& a, std::size_t begin, std::size_t total);

// Composites built from the primitives above.
Var sum_all(const Var& a);
Var concat_last(std::span<const Var> parts);
/// Sum over the last axis, replicated back to the input shape.
Var rowsum(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(cplx s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

}  // namespace camel::ad
