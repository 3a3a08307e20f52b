#pragma once

#include <functional>
#include <vector>

#include "camel/ctensor.hpp"
#include "camel/rng.hpp"
#include "camel/tape.hpp"

namespace testing {

using camel::cplx;
using camel::CTensor;

inline CTensor randn(camel::Rng& rng, camel::Shape s) {
    CTensor t(std::move(s));
    for (auto& z : t.data()) z = cplx(rng.normal(), rng.normal());
    return t;
}

/// Evaluates a tape expression on constant inputs and returns its value.
inline CTensor eval(const std::function<camel::ad::Var(camel::ad::Tape&, const std::vector<camel::ad::Var>&)>& f,
                    const std::vector<CTensor>& inputs) {
    camel::ad::Tape t;
    std::vector<camel::ad::Var> v;
    for (const auto& x : inputs) v.push_back(t.constant(x));
    return f(t, v).value();
}

}  // namespace testing
