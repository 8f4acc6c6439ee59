#pragma once

#include "greenflow/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>

namespace greenflow::testing {

inline nn::Tensor4 random_tensor(int n, int c, int h, int w, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    nn::Tensor4 t(n, c, h, w);
    for (double& v : t.values()) v = d(rng);
    return t;
}

/// Largest relative deviation between an analytic gradient and central
/// differences of `loss` with respect to `x` (perturbed in place). Entries
/// whose magnitude is below 1e-3 of the largest gradient entry (or of
/// `scale`, when larger) are compared against that floor instead of their
/// own size.
inline double gradient_error(std::span<double> x, std::span<const double> analytic,
                             const std::function<double()>& loss, double eps = 1e-5, double scale = 0.0) {
    for (double g : analytic) scale = std::max(scale, std::abs(g));
    const double floor = std::max(1e-3 * scale, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double up = loss();
        x[i] = keep - eps;
        const double down = loss();
        x[i] = keep;
        const double fd = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), floor});
        worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace greenflow::testing
