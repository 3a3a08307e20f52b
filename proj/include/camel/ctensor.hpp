#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace camel {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

/// Thrown on any shape contract violation. The message names the shapes involved.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Dense row-major tensor of complex doubles.
class CTensor {
public:
    CTensor() : shape_{}, data_(1) {}
    explicit CTensor(Shape shape);
    CTensor(Shape shape, std::vector<cplx> data);
    CTensor(Shape shape, cplx fill);

    static CTensor scalar(cplx v) { return CTensor(Shape{}, std::vector<cplx>{v}); }
    static CTensor zeros(Shape shape) { return CTensor(std::move(shape)); }
    static CTensor ones(Shape shape) { return CTensor(std::move(shape), cplx(1.0, 0.0)); }
    /// n x n complex identity.
    static CTensor eye(std::size_t n);
    static CTensor from_rows(std::initializer_list<std::initializer_list<cplx>> rows);
    static CTensor vector(std::initializer_list<cplx> v);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    cplx& operator[](std::size_t i) { return data_[i]; }
    const cplx& operator[](std::size_t i) const { return data_[i]; }
    cplx& at(std::size_t i, std::size_t j);
    const cplx& at(std::size_t i, std::size_t j) const;
    cplx item() const;

    /// Same data, new shape. Element count must match.
    CTensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;
    /// Largest |imaginary part| over all entries.
    double max_abs_imag() const noexcept;

    friend bool operator==(const CTensor& a, const CTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<cplx> data_;
};

void require_same_shape(const CTensor& a, const CTensor& b, const char* op);

// Exact elementwise and linear-algebra kernels. All of them validate shapes and
// throw ShapeError on mismatch.
CTensor add(const CTensor& a, const CTensor& b);
CTensor sub(const CTensor& a, const CTensor& b);
CTensor cmul(const CTensor& a, const CTensor& b);
CTensor scale(const CTensor& a, cplx s);
CTensor conj(const CTensor& a);
CTensor real_part(const CTensor& a);
CTensor imag_part(const CTensor& a);
CTensor cabs(const CTensor& a);

/// Complex matrix product. Rank-2 x rank-2, or batched rank-3 x rank-3 with equal batch.
CTensor cmatmul(const CTensor& a, const CTensor& b);
/// Swap the last two axes (rank 2 or 3).
CTensor transpose(const CTensor& a);
/// Conjugate transpose of a rank-2 tensor.
CTensor hermitian(const CTensor& a);

/// sum_k conj(a_k) b_k
cplx vdot(const CTensor& a, const CTensor& b);
double norm2(const CTensor& a);
double max_abs_diff(const CTensor& a, const CTensor& b);

}  // namespace camel
