#pragma once

#include "greenflow/field.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace greenflow {

class Grid;
struct DeviceSpec;

using cplx = std::complex<double>;

/// Effective-mass Hamiltonian on the silicon nodes, split into x-slices.
/// Slice blocks are real symmetric; neighbouring slices couple through -t I.
struct Hamiltonian {
    double hopping = 0.0;                 // t = hbar^2 / (2 m* a^2), eV
    std::vector<Eigen::MatrixXd> blocks;  // one per x-slice

    int slices() const { return static_cast<int>(blocks.size()); }
    int block_size() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().rows()); }
};

/// t = hbar^2 / (2 m* a^2) in eV for mass ratio m*/m_e and spacing a in nm.
double hopping_energy(double mass_ratio, double spacing_nm);

/// Onsite 4t - V(x, y) on silicon nodes (E_c = 0); oxide nodes are a hard
/// wall and do not enter.
Hamiltonian assemble_hamiltonian(const Grid& grid, const Field& potential);

/// Retarded self-energy of a semi-infinite lead that repeats `edge_block`
/// with inter-slice coupling -t I. Evaluated in the transverse eigenbasis
/// with the closed-form surface Green's function of each 1D mode. For real
/// energies inside a mode's band the outgoing root is chosen (Im <= 0).
Eigen::MatrixXcd lead_self_energy(const Eigen::MatrixXd& edge_block, double hopping, cplx energy);

/// Number of lead modes propagating at real energy E.
int propagating_modes(const Eigen::MatrixXd& edge_block, double hopping, double energy);

/// Broadening Gamma = i (Sigma - Sigma^dagger).
Eigen::MatrixXcd broadening(const Eigen::MatrixXcd& sigma);

struct GreensState {
    double energy = 0.0;
    /// Diagonal blocks of G^R; filled only when requested.
    std::vector<Eigen::MatrixXcd> diagonal_blocks;
    Eigen::MatrixXcd sigma_l, sigma_r;
    Eigen::MatrixXcd gamma_l, gamma_r;
    /// diag(G Gamma_L G^dagger) and diag(G Gamma_R G^dagger), slices x block.
    Eigen::MatrixXd spectral_l, spectral_r;
    /// Tr(Gamma_L G Gamma_R G^dagger).
    double transmission = 0.0;
    /// Tr(Gamma_R G Gamma_L G^dagger), computed from the other corner block.
    double transmission_reverse = 0.0;
};

struct RgfOptions {
    double eta = 1e-6;  // eV
    bool keep_diagonal_blocks = false;
};

/// Recursive Green's function sweep for one energy. Self-energies are
/// supplied by the caller (normally lead_self_energy at E + i eta).
/// Throws std::runtime_error naming slice and energy on a singular pivot.
GreensState rgf_diagonal(const Hamiltonian& h, const Eigen::MatrixXcd& sigma_l, const Eigen::MatrixXcd& sigma_r,
                         double energy, const RgfOptions& options = {});

/// Uniform trapezoid energy grid.
struct EnergyGrid {
    double e_min = 0.0;
    double e_max = 0.0;
    int n_points = 0;

    EnergyGrid() = default;
    EnergyGrid(double lo, double hi, int n);

    double step() const { return (e_max - e_min) / (n_points - 1); }
    double point(int i) const { return e_min + i * step(); }
    double weight(int i) const { return (i == 0 || i == n_points - 1) ? 0.5 * step() : step(); }
};

/// Occupation summed over the free transverse (z) motion per unit sheet
/// width: sqrt(m* kT / (2 pi hbar^2)) F_{-1/2}((mu - E)/kT), in 1/nm.
double transverse_occupation(double energy, double mu, double temperature, double mass_ratio);

/// Fermi function, with the T = 0 limit taken as a step equal to 1/2 at E = mu.
double fermi(double energy, double mu, double temperature);

/// Electron density in cm^-3 on the grid from per-energy spectral functions.
/// The z direction is integrated analytically; dividing by the cell volume
/// a^2 W makes the sheet width cancel.
Field carrier_density(const Grid& grid, std::span<const GreensState> states, double mu_l, double mu_r,
                      double temperature, const EnergyGrid& egrid);

/// Transverse treatment for Landauer current: when present, the occupation
/// is integrated over the free z motion of a sheet of the given width.
struct SheetWidth {
    double width_nm;
    double mass_ratio;
};

/// I = (2q/h) integral T(E) [f_L - f_R] dE on the trapezoid grid, in A.
double landauer_current(std::span<const double> energies, std::span<const double> transmission, double mu_l,
                        double mu_r, double temperature, std::optional<SheetWidth> sheet = std::nullopt);

/// Source Fermi level (eV above the flat-band edge E_c = 0) at which the
/// semi-infinite silicon lead holds sd_doping electrons, found by bisection.
double neutral_fermi_level(const DeviceSpec& spec);

/// Frozen value from the spec when present, otherwise neutral_fermi_level.
double contact_fermi_level(const DeviceSpec& spec);

struct NegfConfig {
    int energy_points = 400;
    double eta = 1e-6;
    double margin_below = 0.05;  // eV below the lowest band edge
    double kt_above = 10.0;      // multiples of kT above the highest Fermi level
};

struct NegfResult {
    Field density;
    std::vector<double> energies;
    std::vector<double> transmission;
    double current = 0.0;
};

/// Full ballistic solve at a given potential: energy grid, lead
/// self-energies, RGF per energy (parallel, ordered reduction), density and
/// terminal current.
NegfResult solve_negf(const Grid& grid, const Field& potential, double mu_source, double mu_drain,
                      const NegfConfig& config = {});

/// Energy window used by solve_negf.
EnergyGrid negf_energy_grid(const Grid& grid, const Field& potential, double mu_source, double mu_drain,
                            const NegfConfig& config);

}  // namespace greenflow
