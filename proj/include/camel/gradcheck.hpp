#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "camel/ctensor.hpp"
#include "camel/rng.hpp"
#include "camel/tape.hpp"

namespace camel::cli {

/// One randomized differentiation check. `inputs` draws the point, `build` maps the input
/// leaves to the op's output; the harness contracts the output with a random complex weight
/// and compares the tape gradient of Re<w, out> with central differences.
struct GradCase {
    std::string name;
    std::function<std::vector<CTensor>(Rng&)> inputs;
    std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)> build;
};

/// Every primitive of the tape and every network layer.
std::vector<GradCase> builtin_grad_cases();

struct GradRow {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t instances = 0;
    bool pass = false;
};

/// Runs each case on `instances` seeded points. `corrupt` names a case whose analytic
/// gradient is deliberately scaled by 1.5 (negative control for the harness itself).
std::vector<GradRow> run_gradcheck(const std::vector<GradCase>& cases, std::size_t instances, std::uint64_t seed,
                                   double tol, const std::string& corrupt = {});

}  // namespace camel::cli
