#include "camel/ctensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace camel {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

CTensor::CTensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_)) {}

CTensor::CTensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("CTensor: shape " + shape_str(shape_) + " needs " +
                         std::to_string(shape_numel(shape_)) + " elements, got " +
                         std::to_string(data_.size()));
    }
}

CTensor::CTensor(Shape shape, cplx fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

CTensor CTensor::eye(std::size_t n) {
    CTensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
}

CTensor CTensor::from_rows(std::initializer_list<std::initializer_list<cplx>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<cplx> d;
    d.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged rows");
        d.insert(d.end(), row.begin(), row.end());
    }
    return CTensor({r, c}, std::move(d));
}

CTensor CTensor::vector(std::initializer_list<cplx> v) {
    return CTensor({v.size()}, std::vector<cplx>(v));
}

std::size_t CTensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
    }
    return shape_[axis];
}

cplx& CTensor::at(std::size_t i, std::size_t j) { return data_[i * shape_.at(1) + j]; }
const cplx& CTensor::at(std::size_t i, std::size_t j) const { return data_[i * shape_.at(1) + j]; }

cplx CTensor::item() const {
    if (data_.size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
    return data_[0];
}

CTensor CTensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    }
    return CTensor(std::move(shape), data_);
}

bool CTensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

double CTensor::max_abs_imag() const noexcept {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z.imag()));
    return m;
}

void require_same_shape(const CTensor& a, const CTensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

namespace {

template <typename F>
CTensor map2(const CTensor& a, const CTensor& b, const char* op, F f) {
    require_same_shape(a, b, op);
    CTensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

template <typename F>
CTensor map1(const CTensor& a, F f) {
    CTensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

}  // namespace

CTensor add(const CTensor& a, const CTensor& b) {
    return map2(a, b, "add", [](cplx x, cplx y) { return x + y; });
}

CTensor sub(const CTensor& a, const CTensor& b) {
    return map2(a, b, "sub", [](cplx x, cplx y) { return x - y; });
}

CTensor cmul(const CTensor& a, const CTensor& b) {
    return map2(a, b, "cmul", [](cplx x, cplx y) {
        return cplx(x.real() * y.real() - x.imag() * y.imag(), x.real() * y.imag() + x.imag() * y.real());
    });
}

CTensor scale(const CTensor& a, cplx s) {
    return map1(a, [s](cplx x) {
        return cplx(x.real() * s.real() - x.imag() * s.imag(), x.real() * s.imag() + x.imag() * s.real());
    });
}

CTensor conj(const CTensor& a) {
    return map1(a, [](cplx x) { return std::conj(x); });
}

CTensor real_part(const CTensor& a) {
    return map1(a, [](cplx x) { return cplx(x.real(), 0.0); });
}

CTensor imag_part(const CTensor& a) {
    return map1(a, [](cplx x) { return cplx(x.imag(), 0.0); });
}

CTensor cabs(const CTensor& a) {
    return map1(a, [](cplx x) { return cplx(std::hypot(x.real(), x.imag()), 0.0); });
}

CTensor cmatmul(const CTensor& a, const CTensor& b) {
    const bool batched = a.rank() == 3;
    if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3))) {
        throw ShapeError("cmatmul: expected rank-2 or rank-3 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t batch = batched ? a.dim(0) : 1;
    const std::size_t off = batched ? 1 : 0;
    const std::size_t n = a.dim(off), k = a.dim(off + 1), m = b.dim(off + 1);
    if (b.dim(off) != k || (batched && b.dim(0) != batch)) {
        throw ShapeError("cmatmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    CTensor out(batched ? Shape{batch, n, m} : Shape{n, m});
    const cplx* pa = a.data().data();
    const cplx* pb = b.data().data();
    cplx* po = out.data().data();
    for (std::size_t t = 0; t < batch; ++t) {
        const cplx* A = pa + t * n * k;
        const cplx* B = pb + t * k * m;
        cplx* O = po + t * n * m;
        for (std::size_t i = 0; i < n; ++i) {
            double* orow = reinterpret_cast<double*>(O + i * m);
            for (std::size_t p = 0; p < k; ++p) {
                const double ar = A[i * k + p].real(), ai = A[i * k + p].imag();
                const double* brow = reinterpret_cast<const double*>(B + p * m);
                for (std::size_t j = 0; j < m; ++j) {
                    const double br = brow[2 * j], bi = brow[2 * j + 1];
                    orow[2 * j] += ar * br - ai * bi;
                    orow[2 * j + 1] += ar * bi + ai * br;
                }
            }
        }
    }
    return out;
}

CTensor transpose(const CTensor& a) {
    if (a.rank() != 2 && a.rank() != 3) {
        throw ShapeError("transpose: expected rank 2 or 3, got " + shape_str(a.shape()));
    }
    const std::size_t batch = a.rank() == 3 ? a.dim(0) : 1;
    const std::size_t r = a.dim(a.rank() - 2), c = a.dim(a.rank() - 1);
    Shape s = a.shape();
    std::swap(s[s.size() - 1], s[s.size() - 2]);
    CTensor out(std::move(s));
    for (std::size_t t = 0; t < batch; ++t)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out[t * r * c + j * r + i] = a[t * r * c + i * c + j];
    return out;
}

CTensor hermitian(const CTensor& a) {
    if (a.rank() != 2) throw ShapeError("hermitian: expected rank-2 tensor, got " + shape_str(a.shape()));
    return conj(transpose(a));
}

cplx vdot(const CTensor& a, const CTensor& b) {
    require_same_shape(a, b, "vdot");
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm2(const CTensor& a) {
    double s = 0.0;
    for (const auto& z : a.data()) s += std::norm(z);
    return std::sqrt(s);
}

double max_abs_diff(const CTensor& a, const CTensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace camel
