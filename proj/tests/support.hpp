#pragma once

// Test-only oracles: seeded random fills, central finite differences and
// straightforward scalar loops that never touch the library's kernels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nilm/core/tensor.hpp"

namespace nilm::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : v) x = dist(rng);
    return v;
}

// d f / d values[i] by central differences, restoring the value afterwards.
inline double central_difference(const std::function<double()>& f, double& value, double h = 1e-5) {
    const double saved = value;
    value = saved + h;
    const double up = f();
    value = saved - h;
    const double down = f();
    value = saved;
    return (up - down) / (2.0 * h);
}

// Relative error with an absolute floor so exactly-zero gradients compare sanely.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace nilm::testing
