#pragma once

#include "greenflow/field.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace greenflow {

class Grid;

/// Finite-volume discretization of div(eps grad V) = -s on a uniform node
/// grid (x-major storage). Edge permittivities are harmonic means of the two
/// nodes; boundary nodes own half (or quarter) cells, which yields
/// homogeneous Neumann conditions wherever no Dirichlet value is imposed.
/// The factorization is computed once and reused for every right-hand side.
class PoissonOperator {
public:
    PoissonOperator(int nx, int ny, double spacing, std::vector<double> permittivity,
                    std::vector<std::uint8_t> dirichlet_mask);

    /// `source` in V/nm^2 at every node (ignored on Dirichlet nodes);
    /// `dirichlet_values` read on masked nodes only. Throws if the relative
    /// residual exceeds 1e-10.
    std::vector<double> solve(std::span<const double> source, std::span<const double> dirichlet_values) const;

    int nx() const { return nx_; }
    int ny() const { return ny_; }

private:
    int nx_;
    int ny_;
    double spacing_;
    std::vector<double> area_;
    std::vector<std::uint8_t> dirichlet_;
    Eigen::SparseMatrix<double> matrix_;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

/// Device electrostatics: gate Dirichlet at vg - workfunction offset, ohmic
/// source at 0 V and drain at +vd on the silicon end columns, Neumann
/// elsewhere. Charge is q (N_D - n).
class PoissonSolver {
public:
    explicit PoissonSolver(const Grid& grid);

    Field solve(const Field& electron_density, double vg, double vd) const;

    /// Space-charge-free solution (n = N_D everywhere), the cold-start guess.
    Field solve_neutral(double vg, double vd) const;

private:
    std::vector<double> boundary_values(double vg, double vd) const;

    const Grid* grid_;
    PoissonOperator op_;
};

Field solve_poisson(const Grid& grid, const Field& electron_density, double vg, double vd);

}  // namespace greenflow
