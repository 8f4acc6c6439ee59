#include "greenflow/negf.hpp"

#include "greenflow/constants.hpp"
#include "greenflow/device.hpp"
#include "greenflow/parallel.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_fermi_dirac.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace greenflow {

namespace {

// F_{-1/2}(x), normalized so F -> e^x for x -> -inf.
double fermi_dirac_mhalf(double x) {
    if (x < -40.0) return std::exp(x);
    static const bool quiet = (gsl_set_error_handler_off(), true);
    (void)quiet;
    gsl_sf_result r;
    const int status = gsl_sf_fermi_dirac_mhalf_e(x, &r);
    if (status != GSL_SUCCESS) throw std::runtime_error("F_{-1/2} evaluation failed");
    return r.val;
}

Eigen::MatrixXd slice_block(const Grid& grid, const Field& potential, int ix, double t) {
    const int rows = grid.silicon_rows();
    const int y0 = grid.first_silicon_row();
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(rows, rows);
    for (int r = 0; r < rows; ++r) {
        block(r, r) = 4.0 * t - potential(ix, y0 + r);
        if (r + 1 < rows) block(r, r + 1) = block(r + 1, r) = -t;
    }
    return block;
}

}  // namespace

double hopping_energy(double mass_ratio, double spacing_nm) {
    return constants::hbar2_over_2me / (mass_ratio * spacing_nm * spacing_nm);
}

Hamiltonian assemble_hamiltonian(const Grid& grid, const Field& potential) {
    if (potential.quantity() != Quantity::Potential)
        throw std::invalid_argument("hamiltonian: field must be tagged Potential");
    if (!potential.matches(grid)) throw std::invalid_argument("hamiltonian: potential shape does not match grid");
    Hamiltonian h;
    h.hopping = hopping_energy(grid.spec().effective_mass_ratio, grid.spacing());
    h.blocks.reserve(grid.nx());
    for (int ix = 0; ix < grid.nx(); ++ix) h.blocks.push_back(slice_block(grid, potential, ix, h.hopping));
    return h;
}

namespace {

struct LeadModes {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd u;

    explicit LeadModes(const Eigen::MatrixXd& edge_block) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(edge_block);
        lambda = eig.eigenvalues();
        u = eig.eigenvectors();
    }

    Eigen::MatrixXcd self_energy(double hopping, cplx energy) const {
        Eigen::VectorXcd sigma_modes(lambda.size());
        for (Eigen::Index m = 0; m < lambda.size(); ++m) {
            // Mode dispersion E = lambda - 2t cos(ka); z = e^{ika} solves z + 1/z = 2c.
            const cplx c = (lambda[m] - energy) / (2.0 * hopping);
            const cplx root = std::sqrt(c * c - 1.0);
            const cplx z1 = c - root;
            const cplx z2 = c + root;
            cplx z;
            if (std::abs(std::abs(z1) - std::abs(z2)) < 1e-13) {
                z = z1.imag() >= 0.0 ? z1 : z2;  // propagating: outgoing wave
            } else {
                z = std::abs(z1) < std::abs(z2) ? z1 : z2;  // decaying into the lead
            }
            sigma_modes[m] = -hopping * z;
        }
        return u.cast<cplx>() * sigma_modes.asDiagonal() * u.transpose().cast<cplx>();
    }
};

}  // namespace

Eigen::MatrixXcd lead_self_energy(const Eigen::MatrixXd& edge_block, double hopping, cplx energy) {
    return LeadModes(edge_block).self_energy(hopping, energy);
}

int propagating_modes(const Eigen::MatrixXd& edge_block, double hopping, double energy) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(edge_block, Eigen::EigenvaluesOnly);
    int count = 0;
    for (Eigen::Index m = 0; m < eig.eigenvalues().size(); ++m)
        count += std::abs(energy - eig.eigenvalues()[m]) <= 2.0 * hopping;
    return count;
}

Eigen::MatrixXcd broadening(const Eigen::MatrixXcd& sigma) {
    return cplx(0.0, 1.0) * (sigma - sigma.adjoint());
}

namespace {

// Stack-allocated blocks for the common case of narrow bodies.
using SmallBlock = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 12, 12>;

// Gauss-Jordan with partial pivoting; the blocks are small enough that this
// beats a blocked LU. A pivot below 1e-14 of the row scale is singular.
template <typename M>
M inverse_block(M m, int slice, double energy) {
    const Eigen::Index n = m.rows();
    M inv = M::Identity(n, n);
    const double scale = m.cwiseAbs2().rowwise().sum().maxCoeff();
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index p = c;
        double best = std::norm(m(c, c));
        for (Eigen::Index r = c + 1; r < n; ++r)
            if (const double v = std::norm(m(r, c)); v > best) {
                best = v;
                p = r;
            }
        if (!(best > 1e-28 * scale)) {
            std::ostringstream msg;
            msg << "rgf: singular pivot block at slice " << slice << ", energy " << energy << " eV";
            throw std::runtime_error(msg.str());
        }
        if (p != c) {
            m.row(p).swap(m.row(c));
            inv.row(p).swap(inv.row(c));
        }
        const cplx piv = 1.0 / m(c, c);
        m.row(c) *= piv;
        inv.row(c) *= piv;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const cplx f = m(r, c);
            if (f == cplx(0.0)) continue;
            m.row(r) -= f * m.row(c);
            inv.row(r) -= f * inv.row(c);
        }
    }
    return inv;
}

template <typename M>
GreensState rgf_impl(const Hamiltonian& h, const Eigen::MatrixXcd& sigma_l, const Eigen::MatrixXcd& sigma_r,
                     double energy, const RgfOptions& options) {
    const int n = h.slices();
    const int b = h.block_size();
    const cplx z(energy, options.eta);
    const double t2 = h.hopping * h.hopping;

    std::vector<M> a(n);
    for (int i = 0; i < n; ++i) {
        a[i] = -h.blocks[i].cast<cplx>();
        a[i].diagonal().array() += z;
    }
    a.front() -= M(sigma_l);
    a.back() -= M(sigma_r);

    std::vector<M> left(n), right(n);
    left[0] = inverse_block<M>(a[0], 0, energy);
    for (int i = 1; i < n; ++i) left[i] = inverse_block<M>(a[i] - t2 * left[i - 1], i, energy);
    right[n - 1] = inverse_block<M>(a[n - 1], n - 1, energy);
    for (int i = n - 2; i >= 0; --i) right[i] = inverse_block<M>(a[i] - t2 * right[i + 1], i, energy);

    GreensState s;
    s.energy = energy;
    s.sigma_l = sigma_l;
    s.sigma_r = sigma_r;
    s.gamma_l = broadening(sigma_l);
    s.gamma_r = broadening(sigma_r);
    s.spectral_l.resize(n, b);
    s.spectral_r.resize(n, b);
    const M gamma_l = s.gamma_l;
    const M gamma_r = s.gamma_r;

    // First column G_{i1} = -t g^R_i G_{i-1,1}; last column G_{iN} = -t g^L_i G_{i+1,N}.
    M col = right[0];
    M x;
    M g_n1;
    for (int i = 0; i < n; ++i) {
        if (i > 0) col = -h.hopping * right[i] * col;
        x.noalias() = col * gamma_l;
        s.spectral_l.row(i) = (x.array() * col.conjugate().array()).rowwise().sum().real().transpose();
        if (i == n - 1) g_n1 = col;
    }
    col = left[n - 1];
    M g_1n;
    for (int i = n - 1; i >= 0; --i) {
        if (i < n - 1) col = -h.hopping * left[i] * col;
        x.noalias() = col * gamma_r;
        s.spectral_r.row(i) = (x.array() * col.conjugate().array()).rowwise().sum().real().transpose();
        if (i == 0) g_1n = col;
    }
    s.transmission = (gamma_l * g_1n * gamma_r * g_1n.adjoint()).trace().real();
    s.transmission_reverse = (gamma_r * g_n1 * gamma_l * g_n1.adjoint()).trace().real();

    if (options.keep_diagonal_blocks) {
        s.diagonal_blocks.resize(n);
        for (int i = 0; i < n; ++i) {
            M m = a[i];
            if (i > 0) m -= t2 * left[i - 1];
            if (i < n - 1) m -= t2 * right[i + 1];
            s.diagonal_blocks[i] = inverse_block<M>(m, i, energy);
        }
    }
    return s;
}

}  // namespace

GreensState rgf_diagonal(const Hamiltonian& h, const Eigen::MatrixXcd& sigma_l, const Eigen::MatrixXcd& sigma_r,
                         double energy, const RgfOptions& options) {
    const int n = h.slices();
    const int b = h.block_size();
    if (n < 1 || b < 1) throw std::invalid_argument("rgf: empty Hamiltonian");
    if (sigma_l.rows() != b || sigma_r.rows() != b) throw std::invalid_argument("rgf: self-energy size mismatch");
    if (options.eta < 0.0) throw std::invalid_argument("rgf: eta must be non-negative");
    if (b <= SmallBlock::MaxRowsAtCompileTime) return rgf_impl<SmallBlock>(h, sigma_l, sigma_r, energy, options);
    return rgf_impl<Eigen::MatrixXcd>(h, sigma_l, sigma_r, energy, options);
}

EnergyGrid::EnergyGrid(double lo, double hi, int n) : e_min(lo), e_max(hi), n_points(n) {
    if (!(lo < hi)) throw std::invalid_argument("energy grid: e_min must be below e_max");
    if (n < 2) throw std::invalid_argument("energy grid: need at least two points");
}

double fermi(double energy, double mu, double temperature) {
    if (temperature <= 0.0) return energy < mu ? 1.0 : energy > mu ? 0.0 : 0.5;
    const double x = (energy - mu) / (constants::k_boltzmann * temperature);
    if (x > 0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

double transverse_occupation(double energy, double mu, double temperature, double mass_ratio) {
    if (temperature <= 0.0) {
        if (energy >= mu) return 0.0;
        return std::sqrt((mu - energy) * mass_ratio / constants::hbar2_over_2me) / constants::pi;
    }
    const double kt = constants::k_boltzmann * temperature;
    const double prefactor = std::sqrt(kt * mass_ratio / (4.0 * constants::pi * constants::hbar2_over_2me));
    return prefactor * fermi_dirac_mhalf((mu - energy) / kt);
}

Field carrier_density(const Grid& grid, std::span<const GreensState> states, double mu_l, double mu_r,
                      double temperature, const EnergyGrid& egrid) {
    if (states.empty() || egrid.n_points < 2) throw std::invalid_argument("carrier density: empty energy grid");
    if (static_cast<int>(states.size()) != egrid.n_points)
        throw std::invalid_argument("carrier density: states do not match the energy grid");
    const int rows = grid.silicon_rows();
    const int y0 = grid.first_silicon_row();
    const double mass = grid.spec().effective_mass_ratio;

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(grid.nx(), rows);
    for (int i = 0; i < egrid.n_points; ++i) {
        const GreensState& s = states[i];
        if (s.spectral_l.rows() != grid.nx() || s.spectral_l.cols() != rows)
            throw std::invalid_argument("carrier density: spectral function shape does not match grid");
        const double w = egrid.weight(i);
        const double occ_l = w * transverse_occupation(s.energy, mu_l, temperature, mass);
        const double occ_r = w * transverse_occupation(s.energy, mu_r, temperature, mass);
        acc += occ_l * s.spectral_l + occ_r * s.spectral_r;
    }
    // spin 2, dE / 2 pi, per cell area a^2 (nm^-3) -> cm^-3
    const double a = grid.spacing();
    const double scale = 2.0 / (2.0 * constants::pi) / (a * a) / constants::per_cm3_to_per_nm3;
    Field n(grid, Quantity::ElectronDensity, 0.0);
    for (int ix = 0; ix < grid.nx(); ++ix)
        for (int r = 0; r < rows; ++r) n(ix, y0 + r) = std::max(0.0, scale * acc(ix, r));
    return n;
}

double landauer_current(std::span<const double> energies, std::span<const double> transmission, double mu_l,
                        double mu_r, double temperature, std::optional<SheetWidth> sheet) {
    if (energies.size() != transmission.size()) throw std::invalid_argument("landauer: size mismatch");
    if (mu_l == mu_r) return 0.0;
    auto integrand = [&](std::size_t i) {
        const double e = energies[i];
        double window;
        if (sheet) {
            window = sheet->width_nm * (transverse_occupation(e, mu_l, temperature, sheet->mass_ratio) -
                                        transverse_occupation(e, mu_r, temperature, sheet->mass_ratio));
        } else {
            window = fermi(e, mu_l, temperature) - fermi(e, mu_r, temperature);
        }
        return transmission[i] * window;
    };
    double sum = 0.0;
    for (std::size_t i = 1; i < energies.size(); ++i)
        sum += 0.5 * (energies[i] - energies[i - 1]) * (integrand(i) + integrand(i - 1));
    return constants::conductance_quantum * sum;
}

double neutral_fermi_level(const DeviceSpec& spec) {
    spec.validate();
    const double a = spec.grid_spacing;
    const double t = hopping_energy(spec.effective_mass_ratio, a);
    const int rows = static_cast<int>(std::lround(spec.body_thickness_y / a)) - 1;
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(rows, rows);
    for (int r = 0; r < rows; ++r) {
        block(r, r) = 4.0 * t;
        if (r + 1 < rows) block(r, r + 1) = block(r + 1, r) = -t;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd lambda = eig.eigenvalues();

    constexpr int n_theta = 4096;  // periodic integrand: midpoint rule converges spectrally
    auto density = [&](double mu) {
        double sum = 0.0;
        for (int m = 0; m < rows; ++m)
            for (int k = 0; k < n_theta; ++k) {
                const double theta = constants::pi * (2.0 * (k + 0.5) / n_theta - 1.0);
                const double e = lambda[m] - 2.0 * t * std::cos(theta);
                sum += transverse_occupation(e, mu, spec.temperature, spec.effective_mass_ratio);
            }
        // spin 2, average over the silicon rows, per cell area a^2
        return 2.0 * sum / n_theta / rows / (a * a);
    };
    const double target = spec.sd_doping * constants::per_cm3_to_per_nm3;
    double lo = lambda.minCoeff() - 2.0 * t - 1.0;
    double hi = lambda.maxCoeff() + 2.0 * t + 1.0;
    if (density(hi) < target) throw std::runtime_error("contact doping exceeds the band capacity");
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (density(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double contact_fermi_level(const DeviceSpec& spec) {
    return spec.contact_fermi_level ? *spec.contact_fermi_level : neutral_fermi_level(spec);
}

EnergyGrid negf_energy_grid(const Grid& grid, const Field& potential, double mu_source, double mu_drain,
                            const NegfConfig& config) {
    double band_min = std::numeric_limits<double>::infinity();
    for (int ix = 0; ix < grid.nx(); ++ix)
        for (int iy = 0; iy < grid.ny(); ++iy)
            if (grid.is_silicon(ix, iy)) band_min = std::min(band_min, -potential(ix, iy));
    // Top of the lowest subband along x; thermionic current over it must be
    // inside the window even when the barrier sits far above both Fermi levels.
    const double t = hopping_energy(grid.spec().effective_mass_ratio, grid.spacing());
    double barrier = -std::numeric_limits<double>::infinity();
    for (int ix = 0; ix < grid.nx(); ++ix) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(slice_block(grid, potential, ix, t), Eigen::EigenvaluesOnly);
        barrier = std::max(barrier, eig.eigenvalues()[0] - 2.0 * t);
    }
    const double kt = constants::k_boltzmann * grid.spec().temperature;
    const double top = std::max({mu_source, mu_drain, barrier}) + config.kt_above * kt;
    return EnergyGrid(band_min - config.margin_below, top, config.energy_points);
}

NegfResult solve_negf(const Grid& grid, const Field& potential, double mu_source, double mu_drain,
                      const NegfConfig& config) {
    const Hamiltonian h = assemble_hamiltonian(grid, potential);
    const EnergyGrid egrid = negf_energy_grid(grid, potential, mu_source, mu_drain, config);

    std::vector<GreensState> states(egrid.n_points);
    const RgfOptions options{config.eta, false};
    const LeadModes source_lead(h.blocks.front());
    const LeadModes drain_lead(h.blocks.back());
    parallel_for(states.size(), [&](std::size_t i) {
        const double e = egrid.point(static_cast<int>(i));
        const cplx z(e, config.eta);
        const auto sigma_l = source_lead.self_energy(h.hopping, z);
        const auto sigma_r = drain_lead.self_energy(h.hopping, z);
        states[i] = rgf_diagonal(h, sigma_l, sigma_r, e, options);
    });

    NegfResult result;
    const double temperature = grid.spec().temperature;
    result.density = carrier_density(grid, states, mu_source, mu_drain, temperature, egrid);
    result.energies.resize(states.size());
    result.transmission.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        result.energies[i] = states[i].energy;
        result.transmission[i] = states[i].transmission;
    }
    result.current = landauer_current(result.energies, result.transmission, mu_source, mu_drain, temperature,
                                      SheetWidth{grid.spec().width_z, grid.spec().effective_mass_ratio});
    return result;
}

}  // namespace greenflow
