#include "greenflow/poisson.hpp"

#include "greenflow/constants.hpp"
#include "greenflow/device.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace greenflow {

namespace {

std::vector<std::uint8_t> device_dirichlet_mask(const Grid& g) {
    std::vector<std::uint8_t> mask(g.size(), 0);
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int iy = 0; iy < g.ny(); ++iy) {
            const bool contact = (ix == 0 || ix == g.nx() - 1) && g.is_silicon(ix, iy);
            if (contact || g.gate_contact(ix, iy)) mask[g.index(ix, iy)] = 1;
        }
    return mask;
}

}  // namespace

PoissonOperator::PoissonOperator(int nx, int ny, double spacing, std::vector<double> permittivity,
                                 std::vector<std::uint8_t> dirichlet_mask)
    : nx_(nx), ny_(ny), spacing_(spacing), dirichlet_(std::move(dirichlet_mask)) {
    const int n = nx * ny;
    if (static_cast<int>(permittivity.size()) != n || static_cast<int>(dirichlet_.size()) != n)
        throw std::invalid_argument("poisson: permittivity/mask size does not match the grid");
    if (std::none_of(dirichlet_.begin(), dirichlet_.end(), [](auto v) { return v != 0; }))
        throw std::invalid_argument("poisson: singular system, no Dirichlet node");

    auto idx = [ny](int ix, int iy) { return ix * ny + iy; };
    // Fraction of a full cell owned along one axis.
    auto own = [](int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };

    area_.resize(n);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(5 * n);
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            const int k = idx(ix, iy);
            area_[k] = own(ix, nx) * own(iy, ny) * spacing * spacing;
            if (dirichlet_[k]) {
                trips.emplace_back(k, k, 1.0);
                continue;
            }
            double diag = 0.0;
            auto couple = [&](int jx, int jy, double face_fraction) {
                if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) return;
                const int j = idx(jx, jy);
                const double ei = permittivity[k];
                const double ej = permittivity[j];
                // Face length / distance = face_fraction on a uniform grid.
                const double w = 2.0 * ei * ej / (ei + ej) * face_fraction;
                trips.emplace_back(k, j, w);
                diag -= w;
            };
            couple(ix - 1, iy, own(iy, ny));
            couple(ix + 1, iy, own(iy, ny));
            couple(ix, iy - 1, own(ix, nx));
            couple(ix, iy + 1, own(ix, nx));
            trips.emplace_back(k, k, diag);
        }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(trips.begin(), trips.end());
    matrix_.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->analyzePattern(matrix_);
    lu_->factorize(matrix_);
    if (lu_->info() != Eigen::Success) throw std::runtime_error("poisson: factorization failed");
}

std::vector<double> PoissonOperator::solve(std::span<const double> source,
                                           std::span<const double> dirichlet_values) const {
    const int n = nx_ * ny_;
    if (static_cast<int>(source.size()) != n || static_cast<int>(dirichlet_values.size()) != n)
        throw std::invalid_argument("poisson: right-hand side size mismatch");
    Eigen::VectorXd rhs(n);
    for (int k = 0; k < n; ++k) rhs[k] = dirichlet_[k] ? dirichlet_values[k] : -source[k] * area_[k];
    Eigen::VectorXd v = lu_->solve(rhs);
    const double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
    const double residual = (matrix_ * v - rhs).lpNorm<Eigen::Infinity>();
    if (!(residual <= 1e-10 * scale) && residual > 1e-300) {
        std::ostringstream msg;
        msg << "poisson: relative residual " << residual / scale << " exceeds 1e-10";
        throw std::runtime_error(msg.str());
    }
    return {v.data(), v.data() + n};
}

PoissonSolver::PoissonSolver(const Grid& grid)
    : grid_(&grid), op_(grid.nx(), grid.ny(), grid.spacing(), grid.permittivities(), device_dirichlet_mask(grid)) {}

std::vector<double> PoissonSolver::boundary_values(double vg, double vd) const {
    const Grid& g = *grid_;
    std::vector<double> values(g.size(), 0.0);
    const double gate = vg - g.spec().gate_workfunction_offset;
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int iy = 0; iy < g.ny(); ++iy) {
            const int k = g.index(ix, iy);
            if (g.gate_contact(ix, iy)) values[k] = gate;
            else if (ix == g.nx() - 1) values[k] = vd;
        }
    return values;
}

Field PoissonSolver::solve(const Field& electron_density, double vg, double vd) const {
    const Grid& g = *grid_;
    if (electron_density.quantity() != Quantity::ElectronDensity)
        throw std::invalid_argument("poisson: density field must be tagged ElectronDensity");
    if (!electron_density.matches(g)) throw std::invalid_argument("poisson: density shape does not match grid");
    std::vector<double> source(g.size());
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int iy = 0; iy < g.ny(); ++iy) {
            const int k = g.index(ix, iy);
            source[k] = constants::q_over_eps0 * constants::per_cm3_to_per_nm3 *
                        (g.donor_density(ix, iy) - electron_density[k]);
        }
    const auto v = op_.solve(source, boundary_values(vg, vd));
    Field out(g, Quantity::Potential);
    std::copy(v.begin(), v.end(), out.values().begin());
    return out;
}

Field PoissonSolver::solve_neutral(double vg, double vd) const {
    const Grid& g = *grid_;
    const std::vector<double> source(g.size(), 0.0);
    const auto v = op_.solve(source, boundary_values(vg, vd));
    Field out(g, Quantity::Potential);
    std::copy(v.begin(), v.end(), out.values().begin());
    return out;
}

Field solve_poisson(const Grid& grid, const Field& electron_density, double vg, double vd) {
    return PoissonSolver(grid).solve(electron_density, vg, vd);
}

}  // namespace greenflow
