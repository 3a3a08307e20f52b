#include "camel/fdiff.hpp"

#include <algorithm>
#include <cmath>

namespace camel::fd {

std::vector<CTensor> complex_gradient(const RealFn& f, std::vector<CTensor> point, double h) {
    std::vector<CTensor> grad;
    grad.reserve(point.size());
    for (auto& t : point) grad.emplace_back(t.shape());
    for (std::size_t p = 0; p < point.size(); ++p) {
        for (std::size_t k = 0; k < point[p].size(); ++k) {
            const cplx x0 = point[p][k];
            point[p][k] = x0 + cplx(h, 0.0);
            const double fr_p = f(point);
            point[p][k] = x0 - cplx(h, 0.0);
            const double fr_m = f(point);
            point[p][k] = x0 + cplx(0.0, h);
            const double fi_p = f(point);
            point[p][k] = x0 - cplx(0.0, h);
            const double fi_m = f(point);
            point[p][k] = x0;
            grad[p][k] = cplx((fr_p - fr_m) / (2.0 * h), (fi_p - fi_m) / (2.0 * h));
        }
    }
    return grad;
}

namespace {

double inf_norm(const CTensor& t) {
    double m = 0.0;
    for (const auto& z : t.data()) m = std::max(m, std::abs(z));
    return m;
}

}  // namespace

double rel_error(const CTensor& a, const CTensor& b, double floor) {
    const double denom = std::max({inf_norm(a), inf_norm(b), floor});
    return max_abs_diff(a, b) / denom;
}

double rel_error(const std::vector<CTensor>& a, const std::vector<CTensor>& b, double floor) {
    if (a.size() != b.size()) throw ShapeError("rel_error: tensor count mismatch");
    double num = 0.0, den = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, max_abs_diff(a[i], b[i]));
        den = std::max({den, inf_norm(a[i]), inf_norm(b[i])});
    }
    return num / den;
}

}  // namespace camel::fd
