#include "doctest.h"
#include "helpers.hpp"

#include "camel/ctensor.hpp"

using namespace camel;
using testing::randn;

TEST_CASE("cmul on hand-picked values") {
    CHECK(cmul(CTensor::vector({{1, 1}}), CTensor::vector({{1, -1}}))[0] == cplx(2, 0));
    CHECK(cmul(CTensor::vector({{0, 1}}), CTensor::vector({{0, 1}}))[0] == cplx(-1, 0));
}

TEST_CASE("cmul agrees bit for bit with the textbook product") {
    Rng rng(11);
    const CTensor a = randn(rng, {100});
    const CTensor b = randn(rng, {100});
    const CTensor p = cmul(a, b);
    for (std::size_t i = 0; i < 100; ++i) {
        const double x = a[i].real(), y = a[i].imag(), u = b[i].real(), v = b[i].imag();
        CHECK(p[i].real() == x * u - y * v);
        CHECK(p[i].imag() == x * v + y * u);
    }
}

TEST_CASE("elementwise kernels reject mismatched shapes and name both") {
    const CTensor a = CTensor::zeros({2, 3});
    const CTensor b = CTensor::zeros({3, 2});
    try {
        (void)cmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(shape_str(a.shape())) != std::string::npos);
        CHECK(msg.find(shape_str(b.shape())) != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(cmatmul(a, a), ShapeError);
}

TEST_CASE("cmatmul") {
    Rng rng(3);
    SUBCASE("identity on the left") {
        const CTensor b = randn(rng, {2, 3});
        CHECK(cmatmul(CTensor::eye(2), b) == b);
    }
    SUBCASE("1x1 reduces to a scalar product") {
        const CTensor a = randn(rng, {1, 1});
        const CTensor b = randn(rng, {1, 1});
        CHECK(cmatmul(a, b)[0] == a[0] * b[0]);
    }
    SUBCASE("random 3x3 against a triple loop") {
        const CTensor a = randn(rng, {3, 3});
        const CTensor b = randn(rng, {3, 3});
        const CTensor c = cmatmul(a, b);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                double re = 0, im = 0;
                for (std::size_t k = 0; k < 3; ++k) {
                    const cplx x = a.at(i, k), y = b.at(k, j);
                    re += x.real() * y.real() - x.imag() * y.imag();
                    im += x.real() * y.imag() + x.imag() * y.real();
                }
                CHECK(std::abs(c.at(i, j) - cplx(re, im)) <= 1e-12);
            }
        }
    }
    SUBCASE("batched product matches per-slice products") {
        const CTensor a = randn(rng, {2, 3, 4});
        const CTensor b = randn(rng, {2, 4, 5});
        const CTensor c = cmatmul(a, b);
        REQUIRE(c.shape() == Shape{2, 3, 5});
        for (std::size_t n = 0; n < 2; ++n) {
            CTensor an({3, 4}), bn({4, 5});
            std::copy_n(a.data().begin() + n * 12, 12, an.data().begin());
            std::copy_n(b.data().begin() + n * 20, 20, bn.data().begin());
            const CTensor cn = cmatmul(an, bn);
            for (std::size_t k = 0; k < 15; ++k) CHECK(c[n * 15 + k] == cn[k]);
        }
    }
}

TEST_CASE("conj and hermitian") {
    CHECK(conj(CTensor::vector({{1, 2}}))[0] == cplx(1, -2));
    Rng rng(5);
    const CTensor x = randn(rng, {4, 2});
    CHECK(conj(conj(x)) == x);
    const CTensor a = randn(rng, {2, 2});
    const CTensor h = hermitian(a);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(h.at(i, j) == std::conj(a.at(j, i)));
    CHECK_THROWS_AS(hermitian(randn(rng, {2, 2, 2})), ShapeError);
}

TEST_CASE("reshape, parts and reductions") {
    const CTensor x = CTensor::from_rows({{{1, 2}, {3, -4}}, {{0, 0}, {-1, 1}}});
    CHECK(x.reshaped({4}).shape() == Shape{4});
    CHECK_THROWS_AS(x.reshaped({3}), ShapeError);
    CHECK(real_part(x)[1] == cplx(3, 0));
    CHECK(imag_part(x)[1] == cplx(-4, 0));
    CHECK(cabs(x)[1] == cplx(5, 0));
    CHECK(vdot(x, x) == cplx(1 + 4 + 9 + 16 + 2, 0));
    CHECK(x.max_abs_imag() == 4.0);
    CHECK(transpose(x).at(0, 1) == x.at(1, 0));
    CTensor bad = x;
    bad[0] = cplx(std::numeric_limits<double>::quiet_NaN(), 0);
    CHECK_FALSE(bad.all_finite());
    CHECK(x.all_finite());
}
