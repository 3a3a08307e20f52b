#pragma once

#include <functional>
#include <vector>

#include "camel/ctensor.hpp"

namespace camel::fd {

/// Step used by every finite-difference oracle in the project.
inline constexpr double kStep = 1e-6;

using RealFn = std::function<double(const std::vector<CTensor>&)>;

/// Central-difference complex gradient dF/dRe + j dF/dIm of a real function, perturbing the
/// real and imaginary part of every element independently. Independent of the tape.
std::vector<CTensor> complex_gradient(const RealFn& f, std::vector<CTensor> point, double h = kStep);

/// ||a - b||_inf / max(||a||_inf, ||b||_inf, floor).
double rel_error(const CTensor& a, const CTensor& b, double floor = 1e-8);
double rel_error(const std::vector<CTensor>& a, const std::vector<CTensor>& b, double floor = 1e-8);

}  // namespace camel::fd
