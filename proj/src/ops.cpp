#include <algorithm>
#include <cmath>

#include "camel/tape.hpp"

namespace camel::ad {

namespace {

Var emit(Op op, std::initializer_list<Var> inputs, CTensor value, VjpFn vjp) {
    Tape& t = inputs.begin()->tape();
    return t.record(op, std::span<const Var>(inputs.begin(), inputs.size()), std::move(value), std::move(vjp));
}

void require_rank(const CTensor& t, std::size_t r, const char* op) {
    if (t.rank() != r) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got shape " +
                         shape_str(t.shape()));
    }
}

struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
    AxisSplit a;
    for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
    a.n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
    return a;
}

inline void cmac(double* o, double ar, double ai, double br, double bi) {
    o[0] += ar * br - ai * bi;
    o[1] += ar * bi + ai * br;
}

std::size_t conv_out_len(std::size_t len, std::size_t k, std::size_t stride) {
    return (len - k) / stride + 1;
}

CTensor conv_fwd_kernel(const CTensor& x, const CTensor& w, std::size_t s) {
    const std::size_t N = x.dim(0), Ci = x.dim(1), L = x.dim(2);
    const std::size_t Co = w.dim(0), K = w.dim(2);
    const std::size_t Lo = conv_out_len(L, K, s);
    CTensor out({N, Co, Lo});
    const auto* px = reinterpret_cast<const double*>(x.data().data());
    const auto* pw = reinterpret_cast<const double*>(w.data().data());
    auto* po = reinterpret_cast<double*>(out.data().data());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Co; ++o) {
            double* orow = po + 2 * (n * Co + o) * Lo;
            for (std::size_t i = 0; i < Ci; ++i) {
                const double* xrow = px + 2 * (n * Ci + i) * L;
                for (std::size_t k = 0; k < K; ++k) {
                    const double wr = pw[2 * ((o * Ci + i) * K + k)], wi = pw[2 * ((o * Ci + i) * K + k) + 1];
                    for (std::size_t t = 0; t < Lo; ++t) {
                        const double* xv = xrow + 2 * (t * s + k);
                        cmac(orow + 2 * t, wr, wi, xv[0], xv[1]);
                    }
                }
            }
        }
    return out;
}

CTensor conv_bwd_input_kernel(const CTensor& g, const CTensor& w, std::size_t L, std::size_t s) {
    const std::size_t N = g.dim(0), Co = g.dim(1), Lo = g.dim(2);
    const std::size_t Ci = w.dim(1), K = w.dim(2);
    CTensor out({N, Ci, L});
    const auto* pg = reinterpret_cast<const double*>(g.data().data());
    const auto* pw = reinterpret_cast<const double*>(w.data().data());
    auto* po = reinterpret_cast<double*>(out.data().data());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Co; ++o) {
            const double* grow = pg + 2 * (n * Co + o) * Lo;
            for (std::size_t i = 0; i < Ci; ++i) {
                double* orow = po + 2 * (n * Ci + i) * L;
                for (std::size_t k = 0; k < K; ++k) {
                    const double wr = pw[2 * ((o * Ci + i) * K + k)], wi = pw[2 * ((o * Ci + i) * K + k) + 1];
                    for (std::size_t t = 0; t < Lo; ++t) cmac(orow + 2 * (t * s + k), wr, wi, grow[2 * t], grow[2 * t + 1]);
                }
            }
        }
    return out;
}

CTensor conv_bwd_weight_kernel(const CTensor& g, const CTensor& x, std::size_t K, std::size_t s) {
    const std::size_t N = g.dim(0), Co = g.dim(1), Lo = g.dim(2);
    const std::size_t Ci = x.dim(1), L = x.dim(2);
    CTensor out({Co, Ci, K});
    const auto* pg = reinterpret_cast<const double*>(g.data().data());
    const auto* px = reinterpret_cast<const double*>(x.data().data());
    auto* po = reinterpret_cast<double*>(out.data().data());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Co; ++o) {
            const double* grow = pg + 2 * (n * Co + o) * Lo;
            for (std::size_t i = 0; i < Ci; ++i) {
                const double* xrow = px + 2 * (n * Ci + i) * L;
                for (std::size_t k = 0; k < K; ++k) {
                    double acc[2] = {0.0, 0.0};
                    for (std::size_t t = 0; t < Lo; ++t) {
                        const double* xv = xrow + 2 * (t * s + k);
                        cmac(acc, grow[2 * t], grow[2 * t + 1], xv[0], xv[1]);
                    }
                    po[2 * ((o * Ci + i) * K + k)] += acc[0];
                    po[2 * ((o * Ci + i) * K + k) + 1] += acc[1];
                }
            }
        }
    return out;
}

double act_scalar(ActKind kind, int order, double x) {
    switch (kind) {
        case ActKind::CRelu:
            if (order == 0) return x > 0.0 ? x : 0.0;
            if (order == 1) return x > 0.0 ? 1.0 : 0.0;
            return 0.0;
        case ActKind::CTanh: {
            const double t = std::tanh(x);
            const double d = 1.0 - t * t;
            switch (order) {
                case 0: return t;
                case 1: return d;
                case 2: return -2.0 * t * d;
                default: return (6.0 * t * t - 2.0) * d;
            }
        }
        case ActKind::CSigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            const double d = s * (1.0 - s);
            switch (order) {
                case 0: return s;
                case 1: return d;
                case 2: return d * (1.0 - 2.0 * s);
                default: return d * (1.0 - 6.0 * s + 6.0 * s * s);
            }
        }
    }
    return 0.0;
}

CTensor softmax_rows(const CTensor& a, bool log) {
    if (a.rank() == 0) throw ShapeError("softmax: needs rank >= 1");
    const std::size_t m = a.dim(a.rank() - 1);
    if (m == 0) throw ShapeError("softmax: empty last axis");
    const std::size_t rows = a.size() / m;
    CTensor out(a.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, a[r * m + j].real());
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) sum += std::exp(a[r * m + j].real() - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < m; ++j) {
            const double v = a[r * m + j].real() - lse;
            out[r * m + j] = log ? v : std::exp(v);
        }
    }
    return out;
}

}  // namespace

const char* act_name(ActKind k) {
    switch (k) {
        case ActKind::CRelu: return "crelu";
        case ActKind::CTanh: return "ctanh";
        case ActKind::CSigmoid: return "csigmoid";
    }
    return "?";
}

ActKind parse_act(const std::string& s) {
    if (s == "crelu") return ActKind::CRelu;
    if (s == "ctanh") return ActKind::CTanh;
    if (s == "csigmoid") return ActKind::CSigmoid;
    throw std::invalid_argument("unknown activation '" + s + "' (expected crelu, ctanh or csigmoid)");
}

Var add(const Var& a, const Var& b) {
    return emit(Op::Add, {a, b}, camel::add(a.value(), b.value()),
                [](const Var&, const Var& c) { return std::vector<Var>{c, c}; });
}

Var sub(const Var& a, const Var& b) {
    return emit(Op::Sub, {a, b}, camel::sub(a.value(), b.value()),
                [](const Var&, const Var& c) { return std::vector<Var>{c, scale(c, -1.0)}; });
}

Var mul(const Var& a, const Var& b) {
    return emit(Op::Mul, {a, b}, camel::cmul(a.value(), b.value()), [a, b](const Var&, const Var& c) {
        return std::vector<Var>{mul(conj(b), c), mul(conj(a), c)};
    });
}

Var scale(const Var& a, cplx s) {
    return emit(Op::Scale, {a}, camel::scale(a.value(), s),
                [s](const Var&, const Var& c) { return std::vector<Var>{scale(c, std::conj(s))}; });
}

Var add_scalar(const Var& a, cplx s) {
    CTensor v = a.value();
    for (auto& z : v.data()) z += s;
    return emit(Op::AddScalar, {a}, std::move(v), [](const Var&, const Var& c) { return std::vector<Var>{c}; });
}

Var partmul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "partmul");
    CTensor v(a.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = cplx(a.value()[i].real() * b.value()[i].real(), a.value()[i].imag() * b.value()[i].imag());
    }
    return emit(Op::PartMul, {a, b}, std::move(v), [a, b](const Var&, const Var& c) {
        return std::vector<Var>{partmul(b, c), partmul(a, c)};
    });
}

Var conj(const Var& a) {
    return emit(Op::Conj, {a}, camel::conj(a.value()),
                [](const Var&, const Var& c) { return std::vector<Var>{conj(c)}; });
}

Var real(const Var& a) {
    return emit(Op::Real, {a}, camel::real_part(a.value()),
                [](const Var&, const Var& c) { return std::vector<Var>{real(c)}; });
}

Var imag(const Var& a) {
    return emit(Op::Imag, {a}, camel::imag_part(a.value()),
                [](const Var&, const Var& c) { return std::vector<Var>{scale(real(c), cplx(0.0, 1.0))}; });
}

Var abs(const Var& a) {
    // d|z|/dz* = z / (2|z|); the conjugate-channel rule collapses to z Re(c) / |z|.
    return emit(Op::Abs, {a}, camel::cabs(a.value()), [a](const Var& out, const Var& c) {
        return std::vector<Var>{mul(mul(a, recip(out)), real(c))};
    });
}

Var recip(const Var& a) {
    CTensor v(a.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const cplx z = a.value()[i];
        v[i] = (z == cplx(0.0, 0.0)) ? cplx(0.0, 0.0) : 1.0 / z;
    }
    return emit(Op::Recip, {a}, std::move(v), [](const Var& out, const Var& c) {
        return std::vector<Var>{scale(mul(conj(mul(out, out)), c), -1.0)};
    });
}

Var exp(const Var& a) {
    CTensor v(a.shape());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a.value()[i]);
    return emit(Op::Exp, {a}, std::move(v),
                [](const Var& out, const Var& c) { return std::vector<Var>{mul(conj(out), c)}; });
}

Var pow(const Var& a, double p) {
    CTensor v(a.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const cplx z = a.value()[i];
        v[i] = (z.imag() == 0.0 && z.real() > 0.0) ? cplx(std::pow(z.real(), p), 0.0) : std::pow(z, p);
    }
    return emit(Op::Pow, {a}, std::move(v), [a, p](const Var&, const Var& c) {
        return std::vector<Var>{mul(conj(scale(pow(a, p - 1.0), p)), c)};
    });
}

Var matmul(const Var& a, const Var& b) {
    return emit(Op::MatMul, {a, b}, camel::cmatmul(a.value(), b.value()), [a, b](const Var&, const Var& c) {
        return std::vector<Var>{matmul(c, conj(transpose(b))), matmul(conj(transpose(a)), c)};
    });
}

Var transpose(const Var& a) {
    return emit(Op::Transpose, {a}, camel::transpose(a.value()),
                [](const Var&, const Var& c) { return std::vector<Var>{transpose(c)}; });
}

Var reshape(const Var& a, Shape shape) {
    Shape orig = a.shape();
    return emit(Op::Reshape, {a}, a.value().reshaped(std::move(shape)),
                [orig](const Var&, const Var& c) { return std::vector<Var>{reshape(c, orig)}; });
}

Var reduce_axis(const Var& a, std::size_t axis) {
    const CTensor& x = a.value();
    if (axis >= x.rank()) {
        throw ShapeError("reduce_axis: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
    }
    const AxisSplit sp = split_at(x.shape(), axis);
    Shape os = x.shape();
    os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
    CTensor out(os);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t k = 0; k < sp.n; ++k)
            for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += x[(o * sp.n + k) * sp.inner + i];
    const std::size_t n = sp.n;
    return emit(Op::ReduceAxis, {a}, std::move(out), [axis, n](const Var&, const Var& c) {
        return std::vector<Var>{expand_axis(c, axis, n)};
    });
}

Var expand_axis(const Var& a, std::size_t axis, std::size_t n) {
    const CTensor& x = a.value();
    if (axis > x.rank()) {
        throw ShapeError("expand_axis: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
    }
    Shape os = x.shape();
    os.insert(os.begin() + static_cast<std::ptrdiff_t>(axis), n);
    const AxisSplit sp = split_at(os, axis);
    CTensor out(os);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t k = 0; k < sp.n; ++k)
            for (std::size_t i = 0; i < sp.inner; ++i) out[(o * sp.n + k) * sp.inner + i] = x[o * sp.inner + i];
    return emit(Op::ExpandAxis, {a}, std::move(out),
                [axis](const Var&, const Var& c) { return std::vector<Var>{reduce_axis(c, axis)}; });
}

Var conv1d(const Var& x, const Var& kernel, std::size_t stride) {
    const CTensor& xv = x.value();
    const CTensor& wv = kernel.value();
    require_rank(xv, 3, "conv1d input");
    require_rank(wv, 3, "conv1d kernel");
    if (stride == 0) throw ShapeError("conv1d: stride must be positive");
    if (wv.dim(1) != xv.dim(1)) {
        throw ShapeError("conv1d: channel mismatch, input " + shape_str(xv.shape()) + " vs kernel " +
                         shape_str(wv.shape()));
    }
    if (wv.dim(2) == 0 || wv.dim(2) > xv.dim(2)) {
        throw ShapeError("conv1d: kernel " + shape_str(wv.shape()) + " longer than input " + shape_str(xv.shape()));
    }
    const std::size_t L = xv.dim(2), K = wv.dim(2);
    return emit(Op::Conv1d, {x, kernel}, conv_fwd_kernel(xv, wv, stride),
                [x, kernel, L, K, stride](const Var&, const Var& c) {
                    return std::vector<Var>{conv1d_back_input(c, conj(kernel), L, stride),
                                            conv1d_back_weight(c, conj(x), K, stride)};
                });
}

Var conv1d_back_input(const Var& g, const Var& kernel, std::size_t length, std::size_t stride) {
    const CTensor& gv = g.value();
    const CTensor& wv = kernel.value();
    require_rank(gv, 3, "conv1d_back_input");
    require_rank(wv, 3, "conv1d_back_input kernel");
    if (gv.dim(1) != wv.dim(0) || wv.dim(2) > length || conv_out_len(length, wv.dim(2), stride) != gv.dim(2)) {
        throw ShapeError("conv1d_back_input: incompatible " + shape_str(gv.shape()) + ", " + shape_str(wv.shape()) +
                         ", length " + std::to_string(length));
    }
    const std::size_t K = wv.dim(2);
    return emit(Op::Conv1dBackInput, {g, kernel}, conv_bwd_input_kernel(gv, wv, length, stride),
                [g, kernel, K, stride](const Var&, const Var& c) {
                    return std::vector<Var>{conv1d(c, conj(kernel), stride),
                                            conv1d_back_weight(conj(g), c, K, stride)};
                });
}

Var conv1d_back_weight(const Var& g, const Var& x, std::size_t ksize, std::size_t stride) {
    const CTensor& gv = g.value();
    const CTensor& xv = x.value();
    require_rank(gv, 3, "conv1d_back_weight");
    require_rank(xv, 3, "conv1d_back_weight input");
    if (gv.dim(0) != xv.dim(0) || ksize > xv.dim(2) || conv_out_len(xv.dim(2), ksize, stride) != gv.dim(2)) {
        throw ShapeError("conv1d_back_weight: incompatible " + shape_str(gv.shape()) + ", " + shape_str(xv.shape()));
    }
    const std::size_t L = xv.dim(2);
    return emit(Op::Conv1dBackWeight, {g, x}, conv_bwd_weight_kernel(gv, xv, ksize, stride),
                [g, x, L, stride](const Var&, const Var& c) {
                    return std::vector<Var>{conv1d(conj(x), c, stride), conv1d_back_input(conj(g), c, L, stride)};
                });
}

Var softmax_last(const Var& a) {
    return emit(Op::Softmax, {a}, softmax_rows(a.value(), false), [](const Var& out, const Var& c) {
        const Var sr = mul(out, real(c));
        return std::vector<Var>{sub(sr, mul(out, rowsum(sr)))};
    });
}

Var log_softmax_last(const Var& a) {
    return emit(Op::LogSoftmax, {a}, softmax_rows(a.value(), true), [](const Var& out, const Var& c) {
        const Var rc = real(c);
        return std::vector<Var>{sub(rc, mul(exp(out), rowsum(rc)))};
    });
}

Var act(const Var& a, ActKind kind, int order) {
    if (order < 0 || order > 3) throw std::invalid_argument("act: derivative order above 3 is not supported");
    CTensor v(a.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const cplx z = a.value()[i];
        v[i] = cplx(act_scalar(kind, order, z.real()), act_scalar(kind, order, z.imag()));
    }
    return emit(Op::Act, {a}, std::move(v), [a, kind, order](const Var&, const Var& c) {
        return std::vector<Var>{partmul(act(a, kind, order + 1), c)};
    });
}

Var slice_last(const Var& a, std::size_t begin, std::size_t len) {
    const CTensor& x = a.value();
    if (x.rank() == 0 || begin + len > x.dim(x.rank() - 1)) {
        throw ShapeError("slice_last: range [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                         ") out of bounds for " + shape_str(x.shape()));
    }
    const std::size_t m = x.dim(x.rank() - 1);
    Shape os = x.shape();
    os.back() = len;
    CTensor out(os);
    const std::size_t rows = m ? x.size() / m : 0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) out[r * len + j] = x[r * m + begin + j];
    return emit(Op::SliceLast, {a}, std::move(out),
                [begin, m](const Var&, const Var& c) { return std::vector<Var>{pad_last(c, begin, m)}; });
}

Var pad_last(const Var& a, std::size_t begin, std::size_t total) {
    const CTensor& x = a.value();
    if (x.rank() == 0 || begin + x.dim(x.rank() - 1) > total) {
        throw ShapeError("pad_last: cannot place " + shape_str(x.shape()) + " at " + std::to_string(begin) +
                         " within " + std::to_string(total));
    }
    const std::size_t len = x.dim(x.rank() - 1);
    Shape os = x.shape();
    os.back() = total;
    CTensor out(os);
    const std::size_t rows = len ? x.size() / len : 0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) out[r * total + begin + j] = x[r * len + j];
    return emit(Op::PadLast, {a}, std::move(out),
                [begin, len](const Var&, const Var& c) { return std::vector<Var>{slice_last(c, begin, len)}; });
}

Var sum_all(const Var& a) {
    return reduce_axis(reshape(a, Shape{a.value().size()}), 0);
}

Var concat_last(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_last: no inputs");
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.value().rank() == 0) throw ShapeError("concat_last: rank-0 input");
        total += p.shape().back();
    }
    Var acc;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const Var padded = pad_last(p, off, total);
        acc = acc.valid() ? add(acc, padded) : padded;
        off += p.shape().back();
    }
    return acc;
}

Var rowsum(const Var& a) {
    const std::size_t last = a.value().rank() - 1;
    return expand_axis(reduce_axis(a, last), last, a.shape().back());
}

}  // namespace camel::ad
