#pragma once

// Independent reference computations used only by tests.

#include "greenflow/negf.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace greenflow::oracle {

/// Surface self-energy of a semi-infinite lead by Lopez-Sancho decimation,
/// carried out in long double. Inter-slice coupling is -t I in both
/// directions. Decimation loses accuracy like eps / Im(z)^2 (intermediate
/// clusters of 2^n slices have level spacings below Im(z)), so compare at
/// Im(z) >~ 1e-3 eV.
inline Eigen::MatrixXcd decimation_self_energy(const Eigen::MatrixXd& onsite, double t, cplx z) {
    using C = std::complex<long double>;
    using M = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
    const auto n = onsite.rows();
    const M id = M::Identity(n, n);
    const C zl(z.real(), z.imag());
    M eps_s = onsite.cast<long double>().cast<C>();
    M eps = eps_s;
    M alpha = C(-t) * id;
    M beta = C(-t) * id;
    for (int it = 0; it < 200; ++it) {
        const M g = (zl * id - eps).inverse();
        const M agb = alpha * g * beta;
        const M bga = beta * g * alpha;
        eps_s += agb;
        eps += agb + bga;
        alpha = (alpha * g * alpha).eval();
        beta = (beta * g * beta).eval();
        if (alpha.norm() < 1e-18L * t) {
            const M s = C(t) * C(t) * (zl * id - eps_s).inverse();
            Eigen::MatrixXcd out(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    out(i, j) = cplx(static_cast<double>(s(i, j).real()), static_cast<double>(s(i, j).imag()));
            return out;
        }
    }
    throw std::runtime_error("decimation did not converge");
}

/// Residual of the lead Dyson equation sigma = t^2 (z - H0 - sigma)^-1.
inline double dyson_residual(const Eigen::MatrixXd& onsite, double t, cplx z, const Eigen::MatrixXcd& sigma) {
    const auto n = onsite.rows();
    const Eigen::MatrixXcd g = (z * Eigen::MatrixXcd::Identity(n, n) - onsite.cast<cplx>() - sigma).inverse();
    return (sigma - t * t * g).cwiseAbs().maxCoeff();
}

/// Full retarded Green's function of the slice Hamiltonian by dense inversion.
inline Eigen::MatrixXcd dense_green(const Hamiltonian& h, const Eigen::MatrixXcd& sigma_l,
                                    const Eigen::MatrixXcd& sigma_r, cplx z) {
    const int n = h.slices();
    const int b = h.block_size();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n * b, n * b);
    for (int i = 0; i < n; ++i) {
        m.block(i * b, i * b, b, b) = z * Eigen::MatrixXcd::Identity(b, b) - h.blocks[i].cast<cplx>();
        if (i + 1 < n) {
            m.block(i * b, (i + 1) * b, b, b) = h.hopping * Eigen::MatrixXcd::Identity(b, b);
            m.block((i + 1) * b, i * b, b, b) = h.hopping * Eigen::MatrixXcd::Identity(b, b);
        }
    }
    m.topLeftCorner(b, b) -= sigma_l;
    m.bottomRightCorner(b, b) -= sigma_r;
    return m.fullPivLu().inverse();
}

}  // namespace greenflow::oracle
