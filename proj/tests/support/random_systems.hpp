#pragma once

#include "greenflow/negf.hpp"

#include <random>

namespace greenflow::testing {

/// Effective-mass slice Hamiltonian with a random potential on every node.
inline Hamiltonian random_hamiltonian(int slices, int rows, double t, double v_spread, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-v_spread, v_spread);
    Hamiltonian h;
    h.hopping = t;
    for (int i = 0; i < slices; ++i) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(rows, rows);
        for (int r = 0; r < rows; ++r) {
            b(r, r) = 4.0 * t + u(rng);
            if (r + 1 < rows) b(r, r + 1) = b(r + 1, r) = -t;
        }
        h.blocks.push_back(b);
    }
    return h;
}

}  // namespace greenflow::testing
