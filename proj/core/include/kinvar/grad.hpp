#pragma once

// Convenience drivers over the tape: full gradients, small Jacobians,
// directional derivatives.

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "kinvar/tape.hpp"

namespace kinvar::ad {

using ScalarFn = std::function<Value(Tape&, std::span<const Value>)>;
using VectorFn = std::function<std::vector<Value>(Tape&, std::span<const Value>)>;

struct GradResult {
    double value = 0;
    std::vector<double> grad;
};

// value + full gradient of a scalar function at x
GradResult gradient(const ScalarFn& f, std::span<const double> x);

struct JacobianResult {
    std::vector<double> value;  // m outputs
    std::vector<double> jac;    // m x n, row-major
    std::size_t rows = 0, cols = 0;
};

// dense Jacobian via one reverse sweep per output (meant for small m)
JacobianResult jacobian(const VectorFn& f, std::span<const double> x);

// gradient . dir
double directional(const ScalarFn& f, std::span<const double> x, std::span<const double> dir);

} // namespace kinvar::ad
